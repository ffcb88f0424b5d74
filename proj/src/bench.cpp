// SPDX-License-Identifier: Apache-2.0
#include <pathfinder/bench.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

namespace pathfinder
{

namespace
{
    constexpr std::array<std::string_view, LevelCount> LevelNames = {
        "0-RETRIEVE",     "1-COMPARE",         "2-CALC-CHANGE",     "3-CALC-COMPLEX",
        "4-CALC-AND-JUDGE", "5-EXPLAIN-FACTORS", "6-OTHER-ADVANCED",
    };
} // namespace

std::string_view toString(Level level) noexcept
{
    return LevelNames[static_cast<std::size_t>(level)];
}

std::optional<Level> parseLevel(std::string_view text) noexcept
{
    for (std::size_t i = 0; i < LevelCount; ++i)
    {
        auto const name = LevelNames[i];
        if (text == name || (text.size() == 1 && text[0] == name[0]))
            return static_cast<Level>(i);
    }
    return std::nullopt;
}

// {{{ dataset

std::vector<BenchCase> parseDataset(std::istream& in)
{
    auto cases = std::vector<BenchCase> {};
    auto line = std::string {};
    auto number = std::size_t { 0 };
    while (std::getline(in, line))
    {
        ++number;
        if (normalizeText(line).empty())
            continue;
        auto const json = Json::parse(line, nullptr, false);
        if (json.is_discarded() || !json.is_object())
            throw DatasetError(number, "not a JSON object");
        auto c = BenchCase {};
        c.id = json.contains("id") ? scalarText(json["id"]) : std::string {};
        c.question = stringOr(json, "question");
        c.goldAnswer = json.contains("gold_answer") ? scalarText(json["gold_answer"]) : std::string {};
        if (c.id.empty())
            throw DatasetError(number, "missing id");
        if (normalizeText(c.question).empty())
            throw DatasetError(number, "missing question");
        if (normalizeText(c.goldAnswer).empty())
            throw DatasetError(number, "missing gold_answer");
        auto const levelField = json.contains("level") ? json["level"] : json.value("difficulty_level", Json());
        auto const level = parseLevel(levelField.is_null() ? std::string {} : scalarText(levelField));
        if (!level)
            throw DatasetError(number, "unknown difficulty level");
        c.level = *level;
        if (auto const it = json.find("doc_refs"); it != json.end())
        {
            if (!it->is_array())
                throw DatasetError(number, "doc_refs must be an array");
            for (auto const& ref: *it)
                c.docRefs.push_back(scalarText(ref));
        }
        if (std::ranges::any_of(cases, [&](auto const& other) { return other.id == c.id; }))
            throw DatasetError(number, "duplicate case id " + c.id);
        cases.push_back(std::move(c));
    }
    return cases;
}

std::vector<BenchCase> loadDataset(const std::filesystem::path& path)
{
    auto in = std::ifstream(path);
    if (!in)
        throw ConfigError(fmt::format("cannot open dataset {}", path.string()));
    return parseDataset(in);
}

// }}}

// {{{ matching

namespace
{
    bool isAsciiLetter(char c)
    {
        return std::isalpha(static_cast<unsigned char>(c)) != 0;
    }

    bool isDigit(char c)
    {
        return std::isdigit(static_cast<unsigned char>(c)) != 0;
    }

    std::string lower(std::string_view text)
    {
        auto out = std::string(text);
        std::ranges::transform(out, out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        return out;
    }

    bool endsWith(std::string_view text, std::string_view suffix)
    {
        return text.size() >= suffix.size() && text.substr(text.size() - suffix.size()) == suffix;
    }

    // Currency written just before position `end` (exclusive), optionally
    // separated by one space. Returns the code and the start of the marker.
    std::pair<std::string, std::size_t> currencyBefore(std::string_view text, std::size_t end)
    {
        auto prefix = text.substr(0, end);
        if (!prefix.empty() && prefix.back() == ' ')
            prefix.remove_suffix(1);
        struct Marker
        {
            std::string_view symbol;
            std::string_view code;
            bool word;
        };
        static constexpr Marker markers[] = {
            { "US$", "USD", false }, { "$", "USD", false },  { "\xE2\x82\xAC", "EUR", false },
            { "\xC2\xA3", "GBP", false }, { "\xC2\xA5", "JPY", false }, { "usd", "USD", true },
            { "eur", "EUR", true },  { "gbp", "GBP", true },  { "jpy", "JPY", true },
        };
        auto const folded = lower(prefix);
        for (auto const& m: markers)
        {
            auto const key = m.word ? folded : std::string(prefix);
            if (!endsWith(key, m.symbol))
                continue;
            auto const start = prefix.size() - m.symbol.size();
            if (m.word && start > 0 && isAsciiLetter(prefix[start - 1]))
                continue;
            return { std::string(m.code), start };
        }
        return { {}, end };
    }

    struct Suffix
    {
        double scale = 1.0;
        bool percent = false;
        std::string currency;
    };

    // Scale word, percent marker and trailing currency code after a number.
    Suffix suffixAt(std::string_view text, std::size_t pos)
    {
        auto out = Suffix {};
        auto const folded = lower(text);

        auto const wordAt = [&](std::size_t at, std::string_view word) {
            if (folded.compare(at, word.size(), word) != 0)
                return false;
            auto const after = at + word.size();
            return after >= folded.size() || !isAsciiLetter(folded[after]);
        };

        auto at = pos;
        auto const attached = at < text.size() && isAsciiLetter(text[at]);
        auto spaced = at;
        while (spaced < text.size() && text[spaced] == ' ')
            ++spaced;

        struct Scale
        {
            std::string_view word;
            double factor;
            bool needsAttach;
        };
        static constexpr Scale scales[] = {
            { "thousands", 1e3, false }, { "thousand", 1e3, false }, { "millions", 1e6, false },
            { "million", 1e6, false },   { "billions", 1e9, false }, { "billion", 1e9, false },
            { "trillions", 1e12, false }, { "trillion", 1e12, false }, { "mn", 1e6, false },
            { "mm", 1e6, false },        { "bn", 1e9, false },       { "tn", 1e12, false },
            { "k", 1e3, true },          { "m", 1e6, true },         { "b", 1e9, true },
            { "t", 1e12, true },
        };
        for (auto const& s: scales)
        {
            auto const where = s.needsAttach ? at : spaced;
            if (s.needsAttach && !attached)
                continue;
            if (wordAt(where, s.word))
            {
                out.scale = s.factor;
                at = where + s.word.size();
                break;
            }
        }

        spaced = at;
        while (spaced < text.size() && text[spaced] == ' ')
            ++spaced;
        if (spaced < text.size() && text[spaced] == '%')
        {
            out.percent = true;
            at = spaced + 1;
        }
        else
        {
            for (auto const word: { std::string_view("percent"), std::string_view("per cent"), std::string_view("pct") })
                if (wordAt(spaced, word))
                {
                    out.percent = true;
                    at = spaced + word.size();
                    break;
                }
        }

        spaced = at;
        while (spaced < text.size() && text[spaced] == ' ')
            ++spaced;
        for (auto const code: { "usd", "eur", "gbp", "jpy" })
            if (wordAt(spaced, code))
            {
                out.currency = lower(code);
                std::ranges::transform(out.currency, out.currency.begin(), [](unsigned char c) {
                    return static_cast<char>(std::toupper(c));
                });
                break;
            }
        return out;
    }

    std::vector<std::string> wordTokens(std::string_view text)
    {
        auto tokens = std::vector<std::string> {};
        auto current = std::string {};
        auto const flush = [&] {
            if (!current.empty())
                tokens.push_back(std::exchange(current, {}));
        };
        for (auto const ch: text)
        {
            auto const c = static_cast<unsigned char>(ch);
            if (std::isspace(c))
                flush();
            else if (std::ispunct(c))
                continue;
            else
                current += static_cast<char>(std::tolower(c));
        }
        flush();
        return tokens;
    }
} // namespace

std::vector<Quantity> extractQuantities(std::string_view text)
{
    auto out = std::vector<Quantity> {};
    std::size_t i = 0;
    while (i < text.size())
    {
        auto const startsNumber =
            isDigit(text[i]) || (text[i] == '.' && i + 1 < text.size() && isDigit(text[i + 1]));
        if (!startsNumber)
        {
            ++i;
            continue;
        }
        if (i > 0 && (isAsciiLetter(text[i - 1]) || isDigit(text[i - 1]) || text[i - 1] == '_'))
        {
            // Glued to a word such as FY2020: skip the whole run.
            while (i < text.size() && (isDigit(text[i]) || text[i] == '.' || text[i] == ','))
                ++i;
            continue;
        }

        auto const start = i;
        auto digits = std::string {};
        while (i < text.size() && isDigit(text[i]))
            digits += text[i++];
        // Thousands separators: a comma followed by exactly three digits.
        while (i + 3 < text.size() && text[i] == ',' && isDigit(text[i + 1]) && isDigit(text[i + 2])
               && isDigit(text[i + 3]) && (i + 4 >= text.size() || !isDigit(text[i + 4])))
        {
            digits.append(text.substr(i + 1, 3));
            i += 4;
        }
        auto decimals = 0;
        if (i + 1 < text.size() && text[i] == '.' && isDigit(text[i + 1]))
        {
            digits += '.';
            ++i;
            while (i < text.size() && isDigit(text[i]))
            {
                digits += text[i++];
                ++decimals;
            }
        }
        if (i < text.size() && isAsciiLetter(text[i]) && std::string_view("kKmMbBtT").find(text[i]) == std::string_view::npos)
        {
            // Glued to a trailing word such as 10-K or 3rd.
            while (i < text.size() && isAsciiLetter(text[i]))
                ++i;
            continue;
        }

        auto q = Quantity {};
        auto const [currency, markerStart] = currencyBefore(text, start);
        auto const suffix = suffixAt(text, i);
        q.currency = !currency.empty() ? currency : suffix.currency;
        q.percent = suffix.percent;

        auto const signPos = markerStart;
        auto negative = false;
        if (signPos >= 1 && text[signPos - 1] == '-')
            negative = signPos < 2 || !std::isalnum(static_cast<unsigned char>(text[signPos - 2]));
        else if (signPos >= 3 && text.substr(signPos - 3, 3) == "\xE2\x88\x92")
            negative = true;

        auto const magnitude = std::stod(digits[0] == '.' ? "0" + digits : digits);
        auto const divisor = q.percent ? 100.0 : 1.0;
        q.value = (negative ? -magnitude : magnitude) * suffix.scale / divisor;
        q.halfUnit = 0.5 * std::pow(10.0, -decimals) * suffix.scale / divisor;
        q.text = std::string(text.substr(start, i - start));
        out.push_back(std::move(q));
    }
    return out;
}

Verdict matchAnswer(std::string_view prediction, std::string_view gold)
{
    auto const goldQuantities = extractQuantities(gold);
    if (!goldQuantities.empty())
    {
        auto const& g = goldQuantities.front();
        auto const predicted = extractQuantities(prediction);
        if (predicted.empty())
            return { false, fmt::format("no number in prediction; gold is {}", g.text) };

        auto currencyConflict = false;
        auto closest = std::optional<double> {};
        for (auto const& p: predicted)
        {
            if (!p.currency.empty() && !g.currency.empty() && p.currency != g.currency)
            {
                currencyConflict = true;
                continue;
            }
            auto const diff = std::abs(p.value - g.value);
            auto const relative = g.value != 0.0 ? diff / std::abs(g.value) : std::numeric_limits<double>::infinity();
            if (relative <= RelativeTolerance * (1 + 1e-9))
                return { true, fmt::format("{} matches {} (relative error {:.4g})", p.text, g.text, relative) };
            if (diff <= g.halfUnit * (1 + 1e-9))
                return { true, fmt::format("{} matches {} within rounding of the gold", p.text, g.text) };
            if (!closest || relative < *closest)
                closest = relative;
        }
        if (!closest && currencyConflict)
            return { false, "currency differs from the gold" };
        return { false, fmt::format("no number matches {} (closest relative error {:.4g})", g.text, closest.value_or(0.0)) };
    }

    auto const goldTokens = wordTokens(gold);
    auto const predTokens = wordTokens(prediction);
    if (goldTokens.empty())
        return { false, "gold has no comparable tokens" };
    auto const hit = std::ranges::search(predTokens, goldTokens);
    if (!hit.empty())
        return { true, "gold text appears in the prediction" };
    return { false, "gold text not found in the prediction" };
}

// }}}

const Schema& judgeSchema()
{
    static auto const schema = Schema {
        "answer_judgement",
        {
            { "equivalent", FieldKind::Boolean },
            { "reason", FieldKind::String, false },
        },
    };
    return schema;
}

Verdict judgeAnswer(Backend& backend, const PromptLibrary& prompts, const BenchCase& benchCase, std::string_view prediction)
{
    auto const system = prompts.render("judge",
                                       {
                                           { "question", benchCase.question },
                                           { "gold", benchCase.goldAnswer },
                                           { "prediction", std::string(prediction) },
                                           { "schema", judgeSchema().describe() },
                                       });
    auto const request = CompletionRequest {
        .messages = { ChatMessage { ChatRole::System, system }, ChatMessage { ChatRole::User, std::string(prediction) } },
        .schema = judgeSchema(),
        .temperature = 0.0,
        .maxTokens = 256,
        .caller = CallerKey { std::string(agent::Judge), 0, benchCase.id, 1 },
    };
    auto const reply = completeStructured(backend, request).value;
    auto const equivalent = reply.at("equivalent").get<bool>();
    auto const reason = stringOr(reply, "reason");
    return { equivalent, fmt::format("judge: {}", reason.empty() ? (equivalent ? "equivalent" : "not equivalent") : reason) };
}

Verdict scoreAnswer(std::string_view prediction, const BenchCase& benchCase, Backend* judge, const PromptLibrary& prompts)
{
    auto verdict = matchAnswer(prediction, benchCase.goldAnswer);
    // Numbers are never second-guessed; only a lexical text miss goes to the judge.
    if (verdict.correct || !judge || !extractQuantities(benchCase.goldAnswer).empty())
        return verdict;
    try
    {
        return judgeAnswer(*judge, prompts, benchCase, prediction);
    }
    catch (const std::exception& e)
    {
        return { false, fmt::format("{}; judge unavailable: {}", verdict.explanation, e.what()) };
    }
}

// {{{ aggregation

AccuracyTable aggregate(const std::vector<CaseResult>& results)
{
    auto rows = std::array<LevelRow, LevelCount> {};
    for (std::size_t i = 0; i < LevelCount; ++i)
        rows[i].level = static_cast<Level>(i);
    auto table = AccuracyTable {};
    for (auto const& r: results)
    {
        auto& row = rows[static_cast<std::size_t>(r.benchCase.level)];
        ++row.count;
        ++table.count;
        if (r.verdict.correct)
        {
            ++row.correct;
            ++table.correct;
        }
    }
    for (auto const& row: rows)
        if (row.count > 0)
            table.rows.push_back(row);
    return table;
}

double weightedOverall(const std::vector<PublishedRow>& rows)
{
    auto const total = std::accumulate(rows.begin(), rows.end(), std::size_t { 0 }, [](auto acc, auto const& r) {
        return acc + r.count;
    });
    if (total == 0)
        return 0.0;
    auto weighted = 0.0;
    for (auto const& r: rows)
        weighted += r.accuracy * double(r.count);
    return weighted / double(total);
}

// }}}

// {{{ runner

BenchReport runBench(const std::vector<BenchCase>& cases, RunConfig config, const BenchEnvironment& env)
{
    config.hitlEnabled = false;
    validateConfig(config);
    auto const corpus = env.corpus ? env.corpus : std::make_shared<const Corpus>();

    auto results = std::vector<CaseResult>(cases.size());
    auto const runCase = [&](std::size_t index) {
        auto const& c = cases[index];
        auto& result = results[index];
        result.benchCase = c;

        auto const scoped = std::make_shared<const Corpus>(corpus->subset(c.docRefs));
        auto const tools = builtinTools(scoped);
        auto backend = env.backendFor(c);
        auto services = RunServices { *backend, env.prompts, tools, env.roster, nullptr, {} };
        for (auto const& doc: scoped->documents())
            services.documentTitles.push_back(doc.title.empty() ? doc.id : doc.title);

        auto store = env.traceDir.empty() ? std::make_unique<TraceStore>()
                                          : std::make_unique<TraceStore>(tracePathFor(env.traceDir, c.id));
        auto const problem = Problem { c.id, c.question, c.docRefs, {} };
        auto const outcome = runProblem(problem, config, services, *store, c.id);

        result.status = outcome.status;
        result.traceRef = outcome.traceRef;
        if (outcome.status != RunStatus::Solved || !outcome.answer)
        {
            result.verdict = { false, "unsolved" };
            return;
        }
        result.prediction = *outcome.answer;
        auto judge = env.judgeFor ? env.judgeFor(c) : nullptr;
        result.verdict = scoreAnswer(result.prediction, c, judge.get(), env.prompts);
    };

    auto const workers = std::max<std::size_t>(1, std::min(env.parallelism, cases.size()));
    if (workers == 1)
    {
        for (std::size_t i = 0; i < cases.size(); ++i)
            runCase(i);
    }
    else
    {
        auto next = std::atomic<std::size_t> { 0 };
        auto failure = std::exception_ptr {};
        auto failureMutex = std::mutex {};
        auto pool = std::vector<std::jthread> {};
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (auto i = next++; i < cases.size(); i = next++)
                {
                    try
                    {
                        runCase(i);
                    }
                    catch (...)
                    {
                        auto const lock = std::lock_guard(failureMutex);
                        if (!failure)
                            failure = std::current_exception();
                    }
                }
            });
        pool.clear();
        if (failure)
            std::rethrow_exception(failure);
    }

    auto report = BenchReport {};
    report.table = aggregate(results);
    report.cases = std::move(results);
    return report;
}

std::string formatTable(const AccuracyTable& table)
{
    auto out = fmt::format("{:<20} {:>9} {:>8} {:>9}\n", "Level", "Questions", "Correct", "Accuracy");
    for (auto const& row: table.rows)
        out += fmt::format("{:<20} {:>9} {:>8} {:>8.1f}%\n",
                           toString(row.level),
                           row.count,
                           row.correct,
                           row.accuracy() * 100.0);
    out += fmt::format("{:<20} {:>9} {:>8} {:>8.1f}%\n", "Overall", table.count, table.correct, table.overall() * 100.0);
    return out;
}

Json toJson(const BenchReport& report)
{
    auto cases = Json::array();
    for (auto const& r: report.cases)
        cases.push_back(Json {
            { "id", r.benchCase.id },
            { "level", toString(r.benchCase.level) },
            { "gold_answer", r.benchCase.goldAnswer },
            { "prediction", r.prediction },
            { "status", r.status == RunStatus::Solved ? "solved" : "unsolved" },
            { "correct", r.verdict.correct },
            { "explanation", r.verdict.explanation },
            { "trace_ref", r.traceRef },
        });
    auto levels = Json::array();
    for (auto const& row: report.table.rows)
        levels.push_back(Json {
            { "level", toString(row.level) },
            { "count", row.count },
            { "correct", row.correct },
            { "accuracy", row.accuracy() },
        });
    return Json {
        { "schema_version", SchemaVersion },
        { "cases", cases },
        { "levels", levels },
        { "overall", { { "count", report.table.count }, { "correct", report.table.correct }, { "accuracy", report.table.overall() } } },
    };
}

// }}}

} // namespace pathfinder
