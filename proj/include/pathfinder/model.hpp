// SPDX-License-Identifier: Apache-2.0
#pragma once

// Protocol types shared by every agent and service.
//
// All types are plain values. Plans are never mutated in place by the
// orchestrator; a replan produces a new Plan with a higher version.

#include <pathfinder/errors.hpp>

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pathfinder
{

inline constexpr int SchemaVersion = 1;

using KeyValues = std::map<std::string, std::string>;

struct Problem
{
    std::string id;
    std::string question;
    std::vector<std::string> corpusRefs;
    KeyValues configOverrides;

    bool operator==(const Problem&) const = default;
};

enum class ConstraintOrigin
{
    Analysis,
    ExpertFeedback,
    Human,
};

struct ConstraintScope
{
    // Empty step id means global scope.
    std::string stepId;

    [[nodiscard]] bool isGlobal() const noexcept { return stepId.empty(); }
    static ConstraintScope global() { return {}; }
    static ConstraintScope stepLocal(std::string id) { return { std::move(id) }; }

    bool operator==(const ConstraintScope&) const = default;
};

struct Constraint
{
    std::string id;
    std::string description;
    ConstraintScope scope;
    ConstraintOrigin origin = ConstraintOrigin::Analysis;
    std::uint32_t planVersionDiscovered = 0;

    bool operator==(const Constraint&) const = default;
};

struct ProblemAnalysis
{
    std::vector<Constraint> constraints;
    std::vector<std::string> requirements;
    std::vector<std::string> assumptions;
    std::string restatement;

    bool operator==(const ProblemAnalysis&) const = default;
};

enum class StepStatus
{
    Pending,
    Running,
    Achieved,
    Infeasible,
    BudgetExhausted,
};

struct StepResult
{
    std::string answer;
    KeyValues artifacts;
    std::vector<std::string> insights;

    bool operator==(const StepResult&) const = default;
};

struct PlanStep
{
    std::string id;
    std::string task;
    std::string goal;
    std::string expertRole;
    std::vector<std::string> dependsOn;
    StepStatus status = StepStatus::Pending;
    std::optional<StepResult> result;

    bool operator==(const PlanStep&) const = default;
};

struct Plan
{
    std::uint32_t version = 1;
    std::vector<PlanStep> steps;
    std::string rationale;
    std::optional<std::uint32_t> supersedes;

    [[nodiscard]] const PlanStep* findStep(std::string_view id) const;
    [[nodiscard]] PlanStep* findStep(std::string_view id);
    [[nodiscard]] bool allAchieved() const;

    bool operator==(const Plan&) const = default;
};

enum class FeedbackStatus
{
    Achieved,
    Infeasible,
    BudgetExhausted,
};

struct AttemptedAlternative
{
    std::string approach;
    std::string outcome;

    bool operator==(const AttemptedAlternative&) const = default;
};

struct FeedbackReport
{
    std::string stepId;
    std::uint32_t planVersion = 1;
    FeedbackStatus status = FeedbackStatus::Achieved;
    std::optional<StepResult> result;
    std::optional<std::string> failureReason;
    std::vector<Constraint> discoveredConstraints;
    std::vector<AttemptedAlternative> attemptedAlternatives;
    std::vector<std::string> insights;
    std::uint32_t iterationsUsed = 1;
    std::uint32_t toolCalls = 0;

    bool operator==(const FeedbackReport&) const = default;
};

struct DeadEnd
{
    std::uint32_t planVersion = 0;
    std::string stepId;
    std::string failureReason;

    bool operator==(const DeadEnd&) const = default;
};

struct KnowledgeState
{
    std::vector<Constraint> constraints;
    std::vector<DeadEnd> deadEnds;
    std::vector<std::string> insights;
    std::vector<FeedbackReport> feedbackHistory;

    [[nodiscard]] std::vector<const Constraint*> globalConstraints() const;

    bool operator==(const KnowledgeState&) const = default;
};

enum class EventKind
{
    RunStarted,
    AnalysisDone,
    PlanCreated,
    StepDispatched,
    ExpertIteration,
    ToolInvoked,
    AssistanceRequested,
    AssistanceReceived,
    FeedbackSubmitted,
    ReplanTriggered,
    SynthesisDone,
    RunFinished,
};

enum class BackendKind
{
    Scripted,
    Live,
};

struct BackendSpec
{
    BackendKind kind = BackendKind::Scripted;
    std::string scenarioPath;
    std::string baseUrl = "https://api.openai.com/v1";
    std::string model;
    std::string apiKeyEnv = "OPENAI_API_KEY";
    int retries = 3;
    int maxInFlight = 4;

    bool operator==(const BackendSpec&) const = default;
};

struct RunConfig
{
    std::uint32_t maxReplans = 3;
    std::uint32_t maxExpertIterations = 8;
    std::uint32_t maxTotalIterations = 64;
    std::chrono::milliseconds humanResponseTimeout { std::chrono::seconds(120) };
    bool hitlEnabled = false;
    BackendSpec backend;

    // Most recent observations kept in an expert's working transcript.
    std::uint32_t transcriptWindow = 20;
    // Dependency-independent steps dispatched together (1 = sequential).
    std::uint32_t parallelSteps = 1;
    double temperature = 0.0;
    std::uint32_t maxTokens = 1024;

    bool operator==(const RunConfig&) const = default;
};

/// Throws ConfigError naming the first out-of-range budget.
void validateConfig(const RunConfig& config);

// {{{ canonical names

[[nodiscard]] std::string_view toString(ConstraintOrigin origin) noexcept;
[[nodiscard]] std::string_view toString(StepStatus status) noexcept;
[[nodiscard]] std::string_view toString(FeedbackStatus status) noexcept;
[[nodiscard]] std::string_view toString(EventKind kind) noexcept;

[[nodiscard]] std::optional<ConstraintOrigin> parseConstraintOrigin(std::string_view text) noexcept;
[[nodiscard]] std::optional<StepStatus> parseStepStatus(std::string_view text) noexcept;
[[nodiscard]] std::optional<FeedbackStatus> parseFeedbackStatus(std::string_view text) noexcept;
[[nodiscard]] std::optional<EventKind> parseEventKind(std::string_view text) noexcept;

[[nodiscard]] StepStatus toStepStatus(FeedbackStatus status) noexcept;

// }}}

// {{{ validation and knowledge merge

struct ValidationVerdict
{
    std::vector<std::string> violations;

    [[nodiscard]] bool ok() const noexcept { return violations.empty(); }
    explicit operator bool() const noexcept { return ok(); }
};

namespace violation
{
    inline constexpr std::string_view TaskGoalNonEmpty = "task and goal non-empty";
    inline constexpr std::string_view StepIdsUnique = "step ids unique";
    inline constexpr std::string_view DependsOnKnown = "depends_on references only step ids in the same plan";
    inline constexpr std::string_view Acyclic = "dependency graph acyclic";
    inline constexpr std::string_view AchievedIffResult = "status=achieved iff result is present";
    inline constexpr std::string_view VersionPositive = "version starts at 1";
    inline constexpr std::string_view SupersedesPrevious = "supersedes = version-1";
    inline constexpr std::string_view StepIdNonEmpty = "step id non-empty";
    inline constexpr std::string_view ExpertRoleNonEmpty = "expert role non-empty";
    inline constexpr std::string_view AchievedAnswerNonEmpty = "answer non-empty for achieved steps";
} // namespace violation

/// Reports every violated Plan/PlanStep invariant, each tagged with the step id
/// where it applies.
[[nodiscard]] ValidationVerdict validatePlan(const Plan& plan);

[[nodiscard]] ValidationVerdict validateReport(const FeedbackReport& report);

/// Lowercased, whitespace-collapsed description plus scope.
[[nodiscard]] std::string constraintKey(const Constraint& constraint);

[[nodiscard]] std::string normalizeText(std::string_view text);

/// Inserts the constraint unless one with the same key already exists.
/// Returns true if inserted.
bool insertConstraint(KnowledgeState& state, Constraint constraint);

/// Throws InvalidReport naming the violated invariant.
[[nodiscard]] KnowledgeState mergeFeedback(KnowledgeState state, const FeedbackReport& report);

// }}}

} // namespace pathfinder
