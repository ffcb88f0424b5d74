// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared fixtures: scripted-reply builders and a one-call run harness.

#include <pathfinder/manager.hpp>

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace pathfinder::testing
{

[[nodiscard]] std::filesystem::path dataDir();

/// Fresh, empty directory under the system temp dir.
[[nodiscard]] std::filesystem::path freshDir(std::string_view name);

// {{{ reply builders

[[nodiscard]] Json analysisReply(std::string restatement = "Compute the requested figure.",
                                 std::vector<std::string> constraints = {},
                                 std::vector<std::string> requirements = { "locate the figure" });

[[nodiscard]] Json stepJson(std::string id,
                            std::string role = "analyst",
                            std::vector<std::string> dependsOn = {},
                            std::string task = "",
                            std::string goal = "");

[[nodiscard]] Json planReply(std::vector<Json> steps, std::string rationale = "scripted plan");

[[nodiscard]] Json achievedReply(std::string answer, std::string thought = "done");
[[nodiscard]] Json infeasibleReply(std::string reason,
                                   std::vector<std::string> globalConstraints = {},
                                   std::string thought = "stuck");
[[nodiscard]] Json toolReply(std::string tool, Json arguments, std::string thought = "look it up");
[[nodiscard]] Json assistanceReply(std::string question, std::string thought = "need guidance");
[[nodiscard]] Json synthesisReply(std::string answer);

// }}}

/// Scenario assembly with the caller-key conventions spelled out once.
class ScenarioBuilder
{
  public:
    explicit ScenarioBuilder(bool strict = true) { _scenario.strict = strict; }

    ScenarioBuilder& analyzer(const Json& reply);
    ScenarioBuilder& planner(std::uint32_t version, const Json& reply, std::uint32_t iteration = 1);
    ScenarioBuilder& expert(std::uint32_t version, std::string stepId, std::uint32_t iteration, const Json& reply);
    ScenarioBuilder& expertRaw(std::uint32_t version, std::string stepId, std::uint32_t iteration, std::string text);
    ScenarioBuilder& manager(std::uint32_t version, std::string answer);

    [[nodiscard]] const ScriptedScenario& scenario() const noexcept { return _scenario; }

  private:
    ScriptedScenario _scenario;
};

/// The two-step revenue-growth scenario: s1 retrieves, s2 computes.
[[nodiscard]] ScenarioBuilder happyScenario();
/// As happyScenario, but s2 is infeasible with a global constraint and plan
/// v2 routes around it with s2b.
[[nodiscard]] ScenarioBuilder replanScenario();

inline constexpr std::string_view ReplanConstraint = "segment table absent from 10-K";

[[nodiscard]] Problem revenueProblem();

/// A scripted tool that returns its "text" argument.
inline constexpr std::string_view EchoTool = "echo";

struct RunCapture
{
    RunOutcome outcome;
    ManagerState state;
    std::vector<TraceEvent> events;
    std::vector<CompletionRequest> requests;
    std::filesystem::path tracePath;

    [[nodiscard]] std::size_t count(EventKind kind) const;
    [[nodiscard]] std::vector<const TraceEvent*> ofKind(EventKind kind) const;
    /// All message text of every planner call (repairs included), in order.
    [[nodiscard]] std::vector<std::string> plannerPrompts() const;
};

class Harness
{
  public:
    Harness();

    RunConfig config;
    ExpertRoster roster = ExpertRoster::defaults();
    PromptLibrary prompts = PromptLibrary::defaults();
    std::shared_ptr<const Corpus> corpus;
    ToolRegistry tools;
    AssistanceChannel* assistance = nullptr;
    /// File-backed trace under this directory when set.
    std::filesystem::path traceDir;
    /// Called with the store before the run starts.
    std::function<void(TraceStore&)> onStore;

    RunCapture run(const ScriptedScenario& scenario, const Problem& problem = revenueProblem(), std::string runId = "run");
};

} // namespace pathfinder::testing
