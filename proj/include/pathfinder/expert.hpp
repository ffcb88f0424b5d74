// SPDX-License-Identifier: Apache-2.0
#pragma once

// Expert agent: one plan step executed as a bounded reason-act loop. Each
// iteration is one structured completion turned into one ExpertAction.

#include <pathfinder/agents.hpp>
#include <pathfinder/tools.hpp>
#include <pathfinder/trace.hpp>

#include <chrono>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace pathfinder
{

// {{{ actions

struct UseTool
{
    std::string tool;
    Json arguments = Json::object();
};

struct RequestAssistance
{
    std::string question;
};

struct DeclareAchieved
{
    StepResult result;
    std::vector<Constraint> constraints;
};

struct DeclareInfeasible
{
    std::string failureReason;
    std::vector<Constraint> constraints;
    std::vector<AttemptedAlternative> alternatives;
    std::vector<std::string> insights;
};

struct ExpertAction
{
    std::variant<UseTool, RequestAssistance, DeclareAchieved, DeclareInfeasible> kind;
    std::string thought;
};

[[nodiscard]] std::string_view actionName(const ExpertAction& action) noexcept;

[[nodiscard]] const Schema& actionSchema();

/// Interprets a parsed reply. Constraints are stamped with ids
/// "v<version>.<step>.c<n>" and origin expert_feedback. Throws Error on a
/// reply that names no valid action or lacks its required fields.
[[nodiscard]] ExpertAction actionFromJson(const Json& value, std::uint32_t planVersion, std::string_view stepId);

// }}}

// {{{ assistance

inline constexpr std::string_view NoHumanFallback = "NO-HUMAN-AVAILABLE: proceed autonomously";
inline constexpr std::size_t AssistanceExcerptSize = 5;

struct AssistanceRequest
{
    std::string id;
    std::string runId;
    std::uint32_t planVersion = 0;
    std::string stepId;
    std::uint32_t iteration = 0;
    std::string question;
    std::vector<std::string> excerpt;
};

void to_json(Json& j, const AssistanceRequest& v);

struct HumanReply
{
    std::string text;
    std::string author;
};

class GatewayUnavailable: public Error
{
  public:
    using Error::Error;
};

/// Where assistance requests go. open() assigns the request id; await()
/// resolves the request exactly once, either with the reply or, on timeout,
/// with nothing (after which late replies are rejected).
class AssistanceChannel
{
  public:
    virtual ~AssistanceChannel() = default;
    virtual std::string open(AssistanceRequest request) = 0;
    virtual std::optional<HumanReply> await(const std::string& requestId, std::chrono::milliseconds timeout) = 0;
};

enum class ObservationOrigin
{
    Tool,
    Human,
    System,
};

[[nodiscard]] std::string_view toString(ObservationOrigin origin) noexcept;

struct Observation
{
    std::string text;
    ObservationOrigin origin = ObservationOrigin::System;
};

// }}}

struct ExpertContext
{
    std::string runId;
    const ProblemAnalysis& analysis;
    const KnowledgeState& knowledge;
    /// Achieved steps of the current plan.
    std::vector<PlanStep> priorResults;
};

struct ExpertServices
{
    Backend& backend;
    const PromptLibrary& prompts;
    const ToolRegistry& tools;
    const ExpertRoster& roster;
    EventSink& events;
    AssistanceChannel* assistance = nullptr;
    const RunConfig& config;
};

/// Blocks the calling step until the human replies or the timeout fires.
/// Emits assistance_requested and assistance_received in every case.
[[nodiscard]] Observation handleAssistance(const AssistanceRequest& request, ExpertServices& services);

/// Runs at most `budget` iterations and returns a well-formed report.
/// Backend transport errors and strict-scenario misses propagate.
[[nodiscard]] FeedbackReport executeStep(const PlanStep& step,
                                         std::uint32_t planVersion,
                                         const ExpertContext& context,
                                         std::uint32_t budget,
                                         ExpertServices& services);

} // namespace pathfinder
