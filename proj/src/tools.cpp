// SPDX-License-Identifier: Apache-2.0
#include <pathfinder/tools.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace pathfinder
{

// {{{ corpus

namespace
{
    std::vector<std::string> whitespaceTokens(std::string_view text)
    {
        auto tokens = std::vector<std::string> {};
        auto current = std::string {};
        for (auto const c: text)
        {
            if (std::isspace(static_cast<unsigned char>(c)))
            {
                if (!current.empty())
                    tokens.push_back(std::move(current));
                current.clear();
            }
            else
            {
                current.push_back(c);
            }
        }
        if (!current.empty())
            tokens.push_back(std::move(current));
        return tokens;
    }

    bool isPunct(char c)
    {
        return std::ispunct(static_cast<unsigned char>(c)) != 0;
    }
} // namespace

std::vector<std::string> searchTokens(std::string_view text)
{
    auto out = std::vector<std::string> {};
    for (auto token: whitespaceTokens(text))
    {
        // Strip surrounding punctuation; inner punctuation such as the
        // separators in "1,577.0" is kept so figures stay one token.
        auto begin = std::size_t { 0 };
        auto end = token.size();
        while (begin < end && isPunct(token[begin]))
            ++begin;
        while (end > begin && isPunct(token[end - 1]))
            --end;
        if (begin == end)
            continue;
        auto word = token.substr(begin, end - begin);
        std::ranges::transform(word, word.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        out.push_back(std::move(word));
    }
    return out;
}

std::vector<Chunk> chunkDocument(const Document& document)
{
    auto const tokens = whitespaceTokens(document.text);
    auto chunks = std::vector<Chunk> {};
    constexpr auto Stride = ChunkTokens - ChunkOverlap;
    for (auto start = std::size_t { 0 }; start < tokens.size(); start += Stride)
    {
        auto const end = std::min(tokens.size(), start + ChunkTokens);
        auto text = std::string {};
        for (auto i = start; i < end; ++i)
        {
            if (i > start)
                text.push_back(' ');
            text += tokens[i];
        }
        chunks.push_back(Chunk { document.id, chunks.size(), std::move(text) });
        if (end == tokens.size())
            break;
    }
    return chunks;
}

Corpus::Corpus(std::vector<Document> documents): _documents(std::move(documents))
{
    std::ranges::sort(_documents, {}, &Document::id);
    for (auto const& doc: _documents)
        for (auto& chunk: chunkDocument(doc))
            _chunks.push_back(std::move(chunk));

    _termCounts.reserve(_chunks.size());
    for (auto const& chunk: _chunks)
    {
        auto counts = std::map<std::string, std::size_t> {};
        for (auto& token: searchTokens(chunk.text))
            ++counts[token];
        for (auto const& [term, _]: counts)
            ++_documentFrequency[term];
        _termCounts.push_back(std::move(counts));
    }
}

Corpus Corpus::load(const std::filesystem::path& path)
{
    namespace fs = std::filesystem;
    auto documents = std::vector<Document> {};

    if (fs::is_directory(path))
    {
        for (auto const& entry: fs::directory_iterator(path))
        {
            if (!entry.is_regular_file())
                continue;
            auto in = std::ifstream(entry.path());
            auto text = std::stringstream {};
            text << in.rdbuf();
            auto const stem = entry.path().stem().string();
            documents.push_back(Document { stem, stem, text.str() });
        }
        return Corpus(std::move(documents));
    }

    auto in = std::ifstream(path);
    if (!in)
        throw ConfigError(fmt::format("cannot open corpus {}", path.string()));
    auto line = std::string {};
    auto lineNumber = std::size_t { 0 };
    while (std::getline(in, line))
    {
        ++lineNumber;
        if (std::ranges::all_of(line, [](unsigned char c) { return std::isspace(c); }))
            continue;
        auto const record = Json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.is_object() || !record.contains("id") || !record.contains("text"))
            throw ConfigError(fmt::format("corpus {} line {}: expected {{id, title, text}}", path.string(), lineNumber));
        auto const id = stringOr(record, "id");
        documents.push_back(Document { id, stringOr(record, "title", id), stringOr(record, "text") });
    }
    return Corpus(std::move(documents));
}

Corpus Corpus::subset(const std::vector<std::string>& docIds) const
{
    if (docIds.empty())
        return *this;
    auto const wanted = std::set<std::string>(docIds.begin(), docIds.end());
    auto picked = std::vector<Document> {};
    for (auto const& doc: _documents)
        if (wanted.contains(doc.id))
            picked.push_back(doc);
    return Corpus(std::move(picked));
}

std::vector<SearchHit> Corpus::search(std::string_view query, std::size_t k) const
{
    auto hits = std::vector<SearchHit> {};
    if (_chunks.empty() || k == 0)
        return hits;

    auto terms = std::set<std::string> {};
    for (auto& t: searchTokens(query))
        terms.insert(std::move(t));

    auto const total = static_cast<double>(_chunks.size());
    for (auto i = std::size_t { 0 }; i < _chunks.size(); ++i)
    {
        auto score = 0.0;
        for (auto const& term: terms)
        {
            auto const tf = _termCounts[i].find(term);
            if (tf == _termCounts[i].end())
                continue;
            auto const df = static_cast<double>(_documentFrequency.at(term));
            score += static_cast<double>(tf->second) * std::log(1.0 + total / df);
        }
        if (score > 0.0)
            hits.push_back(SearchHit { _chunks[i].docId, _chunks[i].ordinal, score, _chunks[i].text });
    }

    std::ranges::sort(hits, [](auto const& a, auto const& b) {
        if (a.score != b.score)
            return a.score > b.score;
        if (a.docId != b.docId)
            return a.docId < b.docId;
        return a.ordinal < b.ordinal;
    });
    if (hits.size() > k)
        hits.resize(k);
    return hits;
}

// }}}

// {{{ registry

void ToolRegistry::add(ToolSpec spec, ToolFunction function)
{
    auto name = spec.name;
    if (!_tools.emplace(name, Entry { std::move(spec), std::move(function) }).second)
        throw ConfigError("duplicate tool name " + name);
}

bool ToolRegistry::contains(std::string_view name) const
{
    return _tools.find(name) != _tools.end();
}

const ToolSpec* ToolRegistry::find(std::string_view name) const
{
    auto const it = _tools.find(name);
    return it == _tools.end() ? nullptr : &it->second.spec;
}

std::vector<ToolSpec> ToolRegistry::specs() const
{
    auto out = std::vector<ToolSpec> {};
    for (auto const& [_, entry]: _tools)
        out.push_back(entry.spec);
    return out;
}

ToolResult ToolRegistry::invoke(std::string_view name, const Json& arguments) const
{
    auto const it = _tools.find(name);
    if (it == _tools.end())
        return ToolResult::failure(fmt::format("unknown tool {}", name));
    if (auto const problems = it->second.spec.arguments.check(arguments); !problems.empty())
        return ToolResult::failure(fmt::format("invalid arguments for {}: {}", name, fmt::join(problems, ", ")));
    try
    {
        return it->second.function(arguments);
    }
    catch (const std::exception& e)
    {
        return ToolResult::failure(fmt::format("tool {} failed: {}", name, e.what()));
    }
}

std::string formatHits(const std::vector<SearchHit>& hits)
{
    if (hits.empty())
        return "no matching passages";
    auto out = std::string {};
    for (auto const& hit: hits)
        out += fmt::format("[{}#{} score={:.4f}] {}\n", hit.docId, hit.ordinal, hit.score, hit.text);
    out.pop_back();
    return out;
}

ToolRegistry builtinTools(std::shared_ptr<const Corpus> corpus)
{
    auto registry = ToolRegistry {};
    registry.add(
        ToolSpec {
            .name = std::string(CalculatorTool),
            .description = "Evaluates an arithmetic expression exactly: + - * / parentheses, unary minus, x% = x/100.",
            .arguments = Schema { "calculator", { { "expr", FieldKind::String } } },
        },
        [](const Json& args) { return calculate(args.at("expr").get<std::string>()); });

    if (!corpus)
        corpus = std::make_shared<const Corpus>();
    registry.add(
        ToolSpec {
            .name = std::string(CorpusSearchTool),
            .description = "Lexical search over the document corpus; returns the top-k passages.",
            .arguments = Schema { "corpus_search",
                                  { { "query", FieldKind::String }, { "k", FieldKind::Integer, false } } },
        },
        [corpus](const Json& args) {
            auto const k = args.contains("k") && args["k"].is_number_integer()
                               ? static_cast<std::size_t>(std::max<std::int64_t>(0, args["k"].get<std::int64_t>()))
                               : std::size_t { 5 };
            return ToolResult::success(formatHits(corpus->search(args.at("query").get<std::string>(), k)));
        });
    return registry;
}

// }}}

} // namespace pathfinder
