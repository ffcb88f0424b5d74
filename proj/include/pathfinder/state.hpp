// SPDX-License-Identifier: Apache-2.0
#pragma once

// The manager's state machine as a fold over trace events. The live
// orchestrator and trace replay both go through applyEvent, so a replayed
// trace reconstructs exactly the state the live run ended in.

#include <pathfinder/trace.hpp>

#include <optional>
#include <string>

namespace pathfinder
{

enum class Phase
{
    Init,
    Analyzing,
    Planning,
    Executing,
    Evaluating,
    Replanning,
    Synthesizing,
    Done,
    Failed,
};

[[nodiscard]] std::string_view toString(Phase phase) noexcept;
[[nodiscard]] bool isLegalTransition(Phase from, Phase to) noexcept;

enum class Decision
{
    Proceed,
    Replan,
    Synthesize,
    Abort,
};

[[nodiscard]] std::string_view toString(Decision decision) noexcept;
[[nodiscard]] std::optional<Decision> parseDecision(std::string_view text) noexcept;

enum class RunStatus
{
    Solved,
    Unsolved,
};

struct RunOutcome
{
    RunStatus status = RunStatus::Unsolved;
    std::optional<std::string> answer;
    std::uint32_t planVersions = 0;
    std::string traceRef;
    std::string diagnostic;

    bool operator==(const RunOutcome&) const = default;
};

void to_json(Json& j, const RunOutcome& v);
void from_json(const Json& j, RunOutcome& v);

struct ManagerState
{
    Phase phase = Phase::Init;
    Problem problem;
    RunConfig config;
    std::optional<ProblemAnalysis> analysis;
    std::optional<Plan> plan;
    KnowledgeState knowledge;
    std::uint32_t replansUsed = 0;
    std::uint32_t totalIterations = 0;
    std::optional<std::string> answer;
    std::string diagnostic;

    bool operator==(const ManagerState&) const = default;
};

void to_json(Json& j, const ManagerState& v);

struct Evaluation
{
    ManagerState next;
    /// Absent for a stale report.
    std::optional<Decision> decision;
    bool stale = false;
};

/// Merges the report and applies the decision rule:
///   achieved and steps remain        -> proceed
///   achieved and nothing remains     -> synthesize
///   not achieved, replans remaining  -> replan
///   otherwise                        -> abort
/// A report for another plan version is stale: it is counted against the
/// iteration total but changes nothing else.
[[nodiscard]] Evaluation evaluateFeedback(const ManagerState& state, const FeedbackReport& report);

/// The severest of a batch of decisions (abort > replan > synthesize > proceed).
[[nodiscard]] Decision combine(Decision a, Decision b) noexcept;

/// Folds one event into the state. Throws Error on an illegal phase
/// transition or a payload inconsistent with the state.
[[nodiscard]] ManagerState applyEvent(ManagerState state, const TraceEvent& event);

[[nodiscard]] RunOutcome outcomeOf(const ManagerState& state, std::string traceRef);

struct ReplayResult
{
    ManagerState state;
    std::optional<RunOutcome> outcome;
    /// False when the log ends before run_finished.
    bool complete = false;
};

/// Throws ReplayError naming the offending seq.
[[nodiscard]] ReplayResult replay(const std::vector<TraceEvent>& events, std::string traceRef = {});
[[nodiscard]] ReplayResult replayFile(const std::filesystem::path& path);

} // namespace pathfinder
