// SPDX-License-Identifier: Apache-2.0
#pragma once

// The manager drives analyze -> plan -> dispatch -> evaluate ->
// (replan | synthesize | abort). It is the single writer of the run state:
// every change is an event appended to the trace and folded through
// applyEvent, the same reducer replay uses.

#include <pathfinder/expert.hpp>
#include <pathfinder/state.hpp>

#include <string>
#include <vector>

namespace pathfinder
{

[[nodiscard]] const Schema& synthesisSchema();

/// One structured completion over the restated problem and every step
/// result. Throws PreconditionViolation for an empty or unfinished plan and
/// SynthesisFailure when no usable answer comes back.
[[nodiscard]] std::string synthesize(const Plan& plan,
                                     const Problem& problem,
                                     const ProblemAnalysis& analysis,
                                     AgentEnvironment env);

struct RunServices
{
    Backend& backend;
    const PromptLibrary& prompts;
    const ToolRegistry& tools;
    const ExpertRoster& roster;
    AssistanceChannel* assistance = nullptr;
    /// Titles shown to the analyzer.
    std::vector<std::string> documentTitles;
};

/// Executes the whole pipeline for one problem, appending every event to
/// `trace`. Never hangs: budgets bound every loop. Analysis, planning,
/// synthesis and backend failures end the run unsolved with a diagnostic;
/// a trace write failure propagates.
[[nodiscard]] RunOutcome runProblem(const Problem& problem,
                                    const RunConfig& config,
                                    RunServices& services,
                                    TraceStore& trace,
                                    std::string runId);

struct RunResult
{
    RunOutcome outcome;
    /// The manager's state when the run returned.
    ManagerState state;
};

/// runProblem, also handing back the live final state.
[[nodiscard]] RunResult runProblemRecorded(const Problem& problem,
                                           const RunConfig& config,
                                           RunServices& services,
                                           TraceStore& trace,
                                           std::string runId);

} // namespace pathfinder
