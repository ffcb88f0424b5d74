// SPDX-License-Identifier: Apache-2.0
#pragma once

// Analyzer and planner agents. Both are single structured completions whose
// output is validated by code before it enters the run.

#include <pathfinder/backend.hpp>
#include <pathfinder/model.hpp>
#include <pathfinder/prompts.hpp>

#include <string>
#include <vector>

namespace pathfinder
{

struct AgentEnvironment
{
    Backend& backend;
    const PromptLibrary& prompts;
    double temperature = 0.0;
    std::uint32_t maxTokens = 1024;
};

// {{{ analyzer

[[nodiscard]] const Schema& analysisSchema();

/// One structured completion (plus at most one repair re-prompt). Constraints
/// come back with origin=analysis and plan_version_discovered=0.
/// Throws AnalysisFailure carrying the raw model text.
[[nodiscard]] ProblemAnalysis analyze(const Problem& problem,
                                      const std::vector<std::string>& documentTitles,
                                      AgentEnvironment env);

// }}}

// {{{ planner

struct ExpertRole
{
    std::string id;
    std::string description;
    std::vector<std::string> tools;

    bool operator==(const ExpertRole&) const = default;
};

struct ExpertRoster
{
    std::vector<ExpertRole> roles;

    [[nodiscard]] const ExpertRole* find(std::string_view id) const;

    /// Throws ConfigError when empty or when role ids repeat.
    void validate() const;

    /// Two generalists covering the built-in tools.
    static ExpertRoster defaults();
};

[[nodiscard]] const Schema& planSchema();

/// The knowledge-dependent part of a planning prompt: one "- [constraint]"
/// line per constraint, then one "- [dead end]" line per dead end.
[[nodiscard]] std::string formatConstraints(const KnowledgeState& knowledge);
[[nodiscard]] std::string formatDeadEnds(const KnowledgeState& knowledge);

inline constexpr std::string_view ConstraintLinePrefix = "- [constraint] ";
inline constexpr std::string_view DeadEndLinePrefix = "- [dead end] ";

/// Version 1 plan. The model output is checked with validatePlan and against
/// the roster; one corrective re-prompt is allowed (caller iteration 2).
/// Throws PlanningFailure.
[[nodiscard]] Plan planInitial(const ProblemAnalysis& analysis,
                               const ExpertRoster& roster,
                               const KnowledgeState& knowledge,
                               AgentEnvironment env);

/// Plan version current.version+1 superseding current. Achieved steps are
/// carried over unchanged; the model supplies the remaining steps.
/// Throws PreconditionViolation if the trigger was achieved, PlanningFailure
/// as planInitial.
[[nodiscard]] Plan replan(const Plan& current,
                          const ProblemAnalysis& analysis,
                          const ExpertRoster& roster,
                          const KnowledgeState& knowledge,
                          const FeedbackReport& trigger,
                          AgentEnvironment env);

/// Pending steps whose dependencies are all achieved, in id order.
[[nodiscard]] std::vector<PlanStep> selectReadySteps(const Plan& plan);

// }}}

} // namespace pathfinder
