// SPDX-License-Identifier: Apache-2.0
#pragma once

// Benchmark runner and scorer: strict answer matching with a numeric
// tolerance, per-level accuracy and a question-weighted overall figure.

#include <pathfinder/manager.hpp>

#include <array>
#include <filesystem>
#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pathfinder
{

enum class Level
{
    Retrieve,
    Compare,
    CalcChange,
    CalcComplex,
    CalcAndJudge,
    ExplainFactors,
    OtherAdvanced,
};

inline constexpr std::size_t LevelCount = 7;

[[nodiscard]] std::string_view toString(Level level) noexcept;
/// Accepts the canonical names ("2-CALC-CHANGE") and the bare tier number.
[[nodiscard]] std::optional<Level> parseLevel(std::string_view text) noexcept;

struct BenchCase
{
    std::string id;
    std::string question;
    std::string goldAnswer;
    Level level = Level::Retrieve;
    std::vector<std::string> docRefs;
};

/// One JSON object per line: {id, question, gold_answer, level, doc_refs}.
/// Blank lines are skipped. Throws DatasetError naming the 1-based line.
[[nodiscard]] std::vector<BenchCase> parseDataset(std::istream& in);
[[nodiscard]] std::vector<BenchCase> loadDataset(const std::filesystem::path& path);

// {{{ matching

struct Quantity
{
    /// Value in base units: scale words applied, percentages divided by 100.
    double value = 0.0;
    /// Half of the last written digit's unit, in base units.
    double halfUnit = 0.0;
    bool percent = false;
    std::string currency;
    std::string text;
};

/// Every number in the text with its currency, scale word and percent sign.
/// Numbers glued to a preceding letter (FY2020, Q3) are not quantities.
[[nodiscard]] std::vector<Quantity> extractQuantities(std::string_view text);

struct Verdict
{
    bool correct = false;
    std::string explanation;
};

/// Numeric path when the gold contains a number: correct iff some number in
/// the prediction is within 1% relative error or half the gold's last-digit
/// unit of the gold's first number, with no currency conflict. Otherwise the
/// case-folded, punctuation-stripped gold tokens must appear contiguously in
/// the prediction.
[[nodiscard]] Verdict matchAnswer(std::string_view prediction, std::string_view gold);

inline constexpr double RelativeTolerance = 0.01;

[[nodiscard]] const Schema& judgeSchema();

/// Asks a model whether a free-text prediction means the same as the gold.
/// Caller key (judge, 0, case id, 1). Throws ParseFailure on an unusable reply.
[[nodiscard]] Verdict judgeAnswer(Backend& backend,
                                  const PromptLibrary& prompts,
                                  const BenchCase& benchCase,
                                  std::string_view prediction);

/// Lexical verdict, then the judge for a text-path miss when one is given.
[[nodiscard]] Verdict scoreAnswer(std::string_view prediction,
                                  const BenchCase& benchCase,
                                  Backend* judge,
                                  const PromptLibrary& prompts);

// }}}

// {{{ aggregation

struct CaseResult
{
    BenchCase benchCase;
    std::string prediction;
    Verdict verdict;
    RunStatus status = RunStatus::Unsolved;
    std::string traceRef;
};

struct LevelRow
{
    Level level = Level::Retrieve;
    std::size_t count = 0;
    std::size_t correct = 0;

    [[nodiscard]] double accuracy() const noexcept { return count == 0 ? 0.0 : double(correct) / double(count); }
};

struct AccuracyTable
{
    /// Populated levels only, in tier order.
    std::vector<LevelRow> rows;
    std::size_t count = 0;
    std::size_t correct = 0;

    [[nodiscard]] double overall() const noexcept { return count == 0 ? 0.0 : double(correct) / double(count); }
};

[[nodiscard]] AccuracyTable aggregate(const std::vector<CaseResult>& results);

/// A published row: question count and accuracy in [0, 1].
struct PublishedRow
{
    std::size_t count = 0;
    double accuracy = 0.0;
};

/// Question-weighted mean of per-level accuracies.
[[nodiscard]] double weightedOverall(const std::vector<PublishedRow>& rows);

// }}}

// {{{ runner

struct BenchReport
{
    std::vector<CaseResult> cases;
    AccuracyTable table;
};

struct BenchEnvironment
{
    std::shared_ptr<const Corpus> corpus;
    const PromptLibrary& prompts;
    const ExpertRoster& roster;
    /// A fresh backend per case, e.g. the case's scripted scenario.
    std::function<std::unique_ptr<Backend>(const BenchCase&)> backendFor;
    /// Optional semantic judge for free-text golds; empty keeps scoring lexical.
    std::function<std::unique_ptr<Backend>(const BenchCase&)> judgeFor;
    /// Empty for in-memory traces.
    std::filesystem::path traceDir;
    std::size_t parallelism = 1;
};

/// Every case runs fully autonomous (HITL forced off). Unsolved runs score
/// incorrect with explanation "unsolved".
[[nodiscard]] BenchReport runBench(const std::vector<BenchCase>& cases, RunConfig config, const BenchEnvironment& env);

/// Plain-text table with one row per populated level and an overall row.
[[nodiscard]] std::string formatTable(const AccuracyTable& table);
[[nodiscard]] Json toJson(const BenchReport& report);

// }}}

} // namespace pathfinder
