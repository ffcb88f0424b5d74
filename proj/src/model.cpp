// SPDX-License-Identifier: Apache-2.0
#include <pathfinder/model.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <set>
#include <utility>

namespace pathfinder
{

ParseFailure::ParseFailure(std::string rawText, std::vector<std::string> diagnostics):
    Error(fmt::format("structured output could not be parsed ({})", fmt::join(diagnostics, "; "))),
    _rawText(std::move(rawText)),
    _diagnostics(std::move(diagnostics))
{
}

const PlanStep* Plan::findStep(std::string_view id) const
{
    auto const it = std::ranges::find(steps, id, &PlanStep::id);
    return it == steps.end() ? nullptr : &*it;
}

PlanStep* Plan::findStep(std::string_view id)
{
    auto const it = std::ranges::find(steps, id, &PlanStep::id);
    return it == steps.end() ? nullptr : &*it;
}

bool Plan::allAchieved() const
{
    return std::ranges::all_of(steps, [](auto const& s) { return s.status == StepStatus::Achieved; });
}

std::vector<const Constraint*> KnowledgeState::globalConstraints() const
{
    auto out = std::vector<const Constraint*> {};
    for (auto const& c: constraints)
        if (c.scope.isGlobal())
            out.push_back(&c);
    return out;
}

void validateConfig(const RunConfig& config)
{
    if (config.maxReplans < 1)
        throw ConfigError("max_replans must be >= 1");
    if (config.maxExpertIterations < 1)
        throw ConfigError("max_expert_iterations must be >= 1");
    if (config.maxTotalIterations < 1)
        throw ConfigError("max_total_iterations must be >= 1");
    if (config.humanResponseTimeout.count() <= 0)
        throw ConfigError("human_response_timeout must be > 0");
    if (config.transcriptWindow < 1)
        throw ConfigError("transcript_window must be >= 1");
    if (config.parallelSteps < 1)
        throw ConfigError("parallel_steps must be >= 1");
    if (config.temperature < 0.0)
        throw ConfigError("temperature must be >= 0");
}

// {{{ enum names

namespace
{
    template <typename E, std::size_t N>
    using NameTable = std::array<std::pair<E, std::string_view>, N>;

    constexpr auto OriginNames = NameTable<ConstraintOrigin, 3> { {
        { ConstraintOrigin::Analysis, "analysis" },
        { ConstraintOrigin::ExpertFeedback, "expert_feedback" },
        { ConstraintOrigin::Human, "human" },
    } };

    constexpr auto StepStatusNames = NameTable<StepStatus, 5> { {
        { StepStatus::Pending, "pending" },
        { StepStatus::Running, "running" },
        { StepStatus::Achieved, "achieved" },
        { StepStatus::Infeasible, "infeasible" },
        { StepStatus::BudgetExhausted, "budget_exhausted" },
    } };

    constexpr auto FeedbackStatusNames = NameTable<FeedbackStatus, 3> { {
        { FeedbackStatus::Achieved, "achieved" },
        { FeedbackStatus::Infeasible, "infeasible" },
        { FeedbackStatus::BudgetExhausted, "budget_exhausted" },
    } };

    constexpr auto EventKindNames = NameTable<EventKind, 12> { {
        { EventKind::RunStarted, "run_started" },
        { EventKind::AnalysisDone, "analysis_done" },
        { EventKind::PlanCreated, "plan_created" },
        { EventKind::StepDispatched, "step_dispatched" },
        { EventKind::ExpertIteration, "expert_iteration" },
        { EventKind::ToolInvoked, "tool_invoked" },
        { EventKind::AssistanceRequested, "assistance_requested" },
        { EventKind::AssistanceReceived, "assistance_received" },
        { EventKind::FeedbackSubmitted, "feedback_submitted" },
        { EventKind::ReplanTriggered, "replan_triggered" },
        { EventKind::SynthesisDone, "synthesis_done" },
        { EventKind::RunFinished, "run_finished" },
    } };

    template <typename E, std::size_t N>
    std::string_view nameOf(const NameTable<E, N>& table, E value) noexcept
    {
        for (auto const& [e, name]: table)
            if (e == value)
                return name;
        return "?";
    }

    template <typename E, std::size_t N>
    std::optional<E> valueOf(const NameTable<E, N>& table, std::string_view name) noexcept
    {
        for (auto const& [e, n]: table)
            if (n == name)
                return e;
        return std::nullopt;
    }
} // namespace

std::string_view toString(ConstraintOrigin origin) noexcept { return nameOf(OriginNames, origin); }
std::string_view toString(StepStatus status) noexcept { return nameOf(StepStatusNames, status); }
std::string_view toString(FeedbackStatus status) noexcept { return nameOf(FeedbackStatusNames, status); }
std::string_view toString(EventKind kind) noexcept { return nameOf(EventKindNames, kind); }

std::optional<ConstraintOrigin> parseConstraintOrigin(std::string_view text) noexcept
{
    return valueOf(OriginNames, text);
}

std::optional<StepStatus> parseStepStatus(std::string_view text) noexcept
{
    return valueOf(StepStatusNames, text);
}

std::optional<FeedbackStatus> parseFeedbackStatus(std::string_view text) noexcept
{
    return valueOf(FeedbackStatusNames, text);
}

std::optional<EventKind> parseEventKind(std::string_view text) noexcept
{
    return valueOf(EventKindNames, text);
}

StepStatus toStepStatus(FeedbackStatus status) noexcept
{
    switch (status)
    {
        case FeedbackStatus::Achieved: return StepStatus::Achieved;
        case FeedbackStatus::Infeasible: return StepStatus::Infeasible;
        case FeedbackStatus::BudgetExhausted: return StepStatus::BudgetExhausted;
    }
    return StepStatus::Infeasible;
}

// }}}

// {{{ validation

namespace
{
    bool isBlank(std::string_view text)
    {
        return std::ranges::all_of(text, [](unsigned char c) { return std::isspace(c); });
    }

    void addViolation(ValidationVerdict& verdict, std::string_view where, std::string_view what)
    {
        if (where.empty())
            verdict.violations.emplace_back(what);
        else
            verdict.violations.push_back(fmt::format("step {}: {}", where, what));
    }
} // namespace

ValidationVerdict validatePlan(const Plan& plan)
{
    auto verdict = ValidationVerdict {};

    if (plan.version < 1)
        addViolation(verdict, {}, violation::VersionPositive);
    if (plan.supersedes && *plan.supersedes + 1 != plan.version)
        addViolation(verdict, {}, violation::SupersedesPrevious);

    auto ids = std::set<std::string> {};
    for (auto const& step: plan.steps)
    {
        if (step.id.empty())
            addViolation(verdict, "<unnamed>", violation::StepIdNonEmpty);
        else if (!ids.insert(step.id).second)
            addViolation(verdict, step.id, violation::StepIdsUnique);
    }

    for (auto const& step: plan.steps)
    {
        if (isBlank(step.task) || isBlank(step.goal))
            addViolation(verdict, step.id, violation::TaskGoalNonEmpty);
        if (isBlank(step.expertRole))
            addViolation(verdict, step.id, violation::ExpertRoleNonEmpty);
        for (auto const& dep: step.dependsOn)
            if (!ids.contains(dep))
                addViolation(verdict, step.id, fmt::format("{} (unknown '{}')", violation::DependsOnKnown, dep));
        if ((step.status == StepStatus::Achieved) != step.result.has_value())
            addViolation(verdict, step.id, violation::AchievedIffResult);
        if (step.status == StepStatus::Achieved && step.result && isBlank(step.result->answer))
            addViolation(verdict, step.id, violation::AchievedAnswerNonEmpty);
    }

    // Kahn's algorithm over known edges; whatever is left over sits on a cycle.
    auto indegree = std::map<std::string, int> {};
    for (auto const& step: plan.steps)
        indegree.try_emplace(step.id, 0);
    for (auto const& step: plan.steps)
        for (auto const& dep: step.dependsOn)
            if (ids.contains(dep))
                ++indegree[step.id];

    auto ready = std::vector<std::string> {};
    for (auto const& [id, degree]: indegree)
        if (degree == 0)
            ready.push_back(id);

    auto visited = std::size_t { 0 };
    while (!ready.empty())
    {
        auto const current = ready.back();
        ready.pop_back();
        ++visited;
        for (auto const& step: plan.steps)
            for (auto const& dep: step.dependsOn)
                if (dep == current && --indegree[step.id] == 0)
                    ready.push_back(step.id);
    }

    if (visited < indegree.size())
    {
        auto onCycle = std::vector<std::string> {};
        for (auto const& [id, degree]: indegree)
            if (degree > 0)
                onCycle.push_back(id);
        verdict.violations.push_back(
            fmt::format("{} (cycle through {})", violation::Acyclic, fmt::join(onCycle, ", ")));
    }

    return verdict;
}

ValidationVerdict validateReport(const FeedbackReport& report)
{
    auto verdict = ValidationVerdict {};
    if (report.stepId.empty())
        verdict.violations.emplace_back("step_id non-empty");
    if (report.iterationsUsed < 1)
        verdict.violations.emplace_back("iterations_used >= 1");
    if (report.status == FeedbackStatus::Achieved)
    {
        if (!report.result)
            verdict.violations.emplace_back("status=achieved => result present");
        else if (isBlank(report.result->answer))
            verdict.violations.emplace_back("answer non-empty for achieved steps");
    }
    else if (!report.failureReason || isBlank(*report.failureReason))
    {
        verdict.violations.emplace_back("status!=achieved => failure_reason present and non-empty");
    }
    for (auto const& c: report.discoveredConstraints)
        if (isBlank(c.description))
            verdict.violations.emplace_back("constraint description non-empty");
    return verdict;
}

// }}}

// {{{ knowledge merge

std::string normalizeText(std::string_view text)
{
    auto out = std::string {};
    out.reserve(text.size());
    auto pendingSpace = false;
    for (unsigned char c: text)
    {
        if (std::isspace(c))
        {
            pendingSpace = !out.empty();
            continue;
        }
        if (pendingSpace)
            out.push_back(' ');
        pendingSpace = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

std::string constraintKey(const Constraint& constraint)
{
    auto const scope = constraint.scope.isGlobal() ? std::string("global") : "step:" + constraint.scope.stepId;
    return normalizeText(constraint.description) + "|" + scope;
}

bool insertConstraint(KnowledgeState& state, Constraint constraint)
{
    auto const key = constraintKey(constraint);
    auto const duplicate =
        std::ranges::any_of(state.constraints, [&](auto const& existing) { return constraintKey(existing) == key; });
    if (duplicate)
        return false;
    state.constraints.push_back(std::move(constraint));
    return true;
}

KnowledgeState mergeFeedback(KnowledgeState state, const FeedbackReport& report)
{
    if (auto const verdict = validateReport(report); !verdict)
        throw InvalidReport(fmt::format("invalid feedback report: {}", fmt::join(verdict.violations, "; ")));

    for (auto const& constraint: report.discoveredConstraints)
        insertConstraint(state, constraint);

    if (report.status != FeedbackStatus::Achieved)
        state.deadEnds.push_back(DeadEnd {
            .planVersion = report.planVersion,
            .stepId = report.stepId,
            .failureReason = *report.failureReason,
        });

    for (auto const& insight: report.insights)
        state.insights.push_back(insight);

    state.feedbackHistory.push_back(report);
    return state;
}

// }}}

} // namespace pathfinder
