// SPDX-License-Identifier: Apache-2.0
#include <pathfinder/state.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <utility>

namespace pathfinder
{

std::string_view toString(Phase phase) noexcept
{
    switch (phase)
    {
        case Phase::Init: return "init";
        case Phase::Analyzing: return "analyzing";
        case Phase::Planning: return "planning";
        case Phase::Executing: return "executing";
        case Phase::Evaluating: return "evaluating";
        case Phase::Replanning: return "replanning";
        case Phase::Synthesizing: return "synthesizing";
        case Phase::Done: return "done";
        case Phase::Failed: return "failed";
    }
    return "unknown";
}

bool isLegalTransition(Phase from, Phase to) noexcept
{
    if (from == to)
        return from != Phase::Done && from != Phase::Failed;

    // Any live phase may fail; terminal phases are final.
    if (to == Phase::Failed)
        return from != Phase::Done && from != Phase::Init;

    switch (from)
    {
        case Phase::Init: return to == Phase::Analyzing;
        case Phase::Analyzing: return to == Phase::Planning;
        case Phase::Planning: return to == Phase::Executing;
        case Phase::Executing: return to == Phase::Evaluating;
        case Phase::Evaluating:
            return to == Phase::Executing || to == Phase::Replanning || to == Phase::Synthesizing;
        case Phase::Replanning: return to == Phase::Executing;
        case Phase::Synthesizing: return to == Phase::Done;
        case Phase::Done:
        case Phase::Failed: return false;
    }
    return false;
}

std::string_view toString(Decision decision) noexcept
{
    switch (decision)
    {
        case Decision::Proceed: return "proceed";
        case Decision::Replan: return "replan";
        case Decision::Synthesize: return "synthesize";
        case Decision::Abort: return "abort";
    }
    return "unknown";
}

std::optional<Decision> parseDecision(std::string_view text) noexcept
{
    for (auto const d: { Decision::Proceed, Decision::Replan, Decision::Synthesize, Decision::Abort })
        if (toString(d) == text)
            return d;
    return std::nullopt;
}

Decision combine(Decision a, Decision b) noexcept
{
    auto const rank = [](Decision d) {
        switch (d)
        {
            case Decision::Proceed: return 0;
            case Decision::Synthesize: return 1;
            case Decision::Replan: return 2;
            case Decision::Abort: return 3;
        }
        return 0;
    };
    return rank(a) >= rank(b) ? a : b;
}

// {{{ json

void to_json(Json& j, const RunOutcome& v)
{
    j = Json {
        { "status", v.status == RunStatus::Solved ? "solved" : "unsolved" },
        { "answer", v.answer ? Json(*v.answer) : Json(nullptr) },
        { "plan_versions", v.planVersions },
        { "trace_ref", v.traceRef },
        { "diagnostic", v.diagnostic },
    };
}

void from_json(const Json& j, RunOutcome& v)
{
    auto const status = j.at("status").get<std::string>();
    if (status != "solved" && status != "unsolved")
        throw Error("unknown run status " + status);
    v.status = status == "solved" ? RunStatus::Solved : RunStatus::Unsolved;
    v.answer = j.contains("answer") && j.at("answer").is_string() ? std::optional(j.at("answer").get<std::string>())
                                                                   : std::nullopt;
    v.planVersions = j.value("plan_versions", 0u);
    v.traceRef = stringOr(j, "trace_ref");
    v.diagnostic = stringOr(j, "diagnostic");
}

void to_json(Json& j, const ManagerState& v)
{
    j = Json {
        { "phase", toString(v.phase) },
        { "problem", v.problem },
        { "config", v.config },
        { "analysis", v.analysis ? Json(*v.analysis) : Json(nullptr) },
        { "plan", v.plan ? Json(*v.plan) : Json(nullptr) },
        { "knowledge", v.knowledge },
        { "replans_used", v.replansUsed },
        { "total_iterations", v.totalIterations },
        { "answer", v.answer ? Json(*v.answer) : Json(nullptr) },
        { "diagnostic", v.diagnostic },
    };
}

// }}}

Evaluation evaluateFeedback(const ManagerState& state, const FeedbackReport& report)
{
    if (!state.plan)
        throw PreconditionViolation("feedback received before any plan exists");

    auto next = state;
    next.totalIterations += report.iterationsUsed;

    if (report.planVersion != state.plan->version)
        return Evaluation { std::move(next), std::nullopt, true };

    auto* step = next.plan->findStep(report.stepId);
    if (!step)
        throw InvalidReport(fmt::format("report names step {} which is not in plan v{}", report.stepId, report.planVersion));
    if (step->status == StepStatus::Achieved)
        throw InvalidReport(fmt::format("step {} is already achieved", report.stepId));

    next.knowledge = mergeFeedback(std::move(next.knowledge), report);
    step->status = toStepStatus(report.status);
    step->result = report.status == FeedbackStatus::Achieved ? report.result : std::nullopt;

    auto decision = Decision::Abort;
    if (report.status == FeedbackStatus::Achieved)
        decision = next.plan->allAchieved() ? Decision::Synthesize : Decision::Proceed;
    else if (next.replansUsed < next.config.maxReplans)
        decision = Decision::Replan;

    return Evaluation { std::move(next), decision, false };
}

namespace
{
    void transition(ManagerState& state, Phase to)
    {
        if (!isLegalTransition(state.phase, to))
            throw Error(fmt::format("illegal phase transition {} -> {}", toString(state.phase), toString(to)));
        state.phase = to;
    }

    void requirePhase(const ManagerState& state, std::initializer_list<Phase> allowed, EventKind kind)
    {
        if (std::ranges::find(allowed, state.phase) == allowed.end())
            throw Error(fmt::format("{} not allowed in phase {}", toString(kind), toString(state.phase)));
    }
} // namespace

ManagerState applyEvent(ManagerState state, const TraceEvent& event)
{
    auto const& p = event.payload;
    switch (event.kind)
    {
        case EventKind::RunStarted:
            if (state.phase != Phase::Init)
                throw Error("run_started after the run began");
            state.problem = p.at("problem").get<Problem>();
            state.config = p.at("config").get<RunConfig>();
            transition(state, Phase::Analyzing);
            break;

        case EventKind::AnalysisDone: {
            requirePhase(state, { Phase::Analyzing }, event.kind);
            auto analysis = p.at("analysis").get<ProblemAnalysis>();
            for (auto const& c: analysis.constraints)
                insertConstraint(state.knowledge, c);
            state.analysis = std::move(analysis);
            transition(state, Phase::Planning);
            break;
        }

        case EventKind::PlanCreated: {
            requirePhase(state, { Phase::Planning, Phase::Replanning }, event.kind);
            auto plan = p.at("plan").get<Plan>();
            auto const expected = state.plan ? state.plan->version + 1 : 1u;
            if (plan.version != expected)
                throw Error(fmt::format("plan version {} where {} was expected", plan.version, expected));
            state.plan = std::move(plan);
            transition(state, Phase::Executing);
            break;
        }

        case EventKind::StepDispatched: {
            requirePhase(state, { Phase::Executing, Phase::Evaluating }, event.kind);
            auto const version = p.at("plan_version").get<std::uint32_t>();
            auto const stepId = p.at("step_id").get<std::string>();
            if (!state.plan || state.plan->version != version)
                throw Error(fmt::format("dispatch for plan v{} which is not current", version));
            auto* step = state.plan->findStep(stepId);
            if (!step || step->status != StepStatus::Pending)
                throw Error(fmt::format("step {} is not pending", stepId));
            step->status = StepStatus::Running;
            transition(state, Phase::Executing);
            break;
        }

        case EventKind::FeedbackSubmitted: {
            requirePhase(state, { Phase::Executing, Phase::Evaluating, Phase::Replanning }, event.kind);
            auto const report = p.at("report").get<FeedbackReport>();
            auto evaluation = evaluateFeedback(state, report);
            auto const recordedStale = p.value("stale", false);
            auto const recordedDecision =
                p.contains("decision") && p.at("decision").is_string()
                    ? parseDecision(p.at("decision").get<std::string>())
                    : std::nullopt;
            if (recordedStale != evaluation.stale || recordedDecision != evaluation.decision)
                throw Error(fmt::format("recorded decision for step {} does not match the decision rule", report.stepId));
            auto const stale = evaluation.stale;
            state = std::move(evaluation.next);
            if (!stale)
                transition(state, Phase::Evaluating);
            break;
        }

        case EventKind::ReplanTriggered: {
            requirePhase(state, { Phase::Evaluating }, event.kind);
            if (state.replansUsed >= state.config.maxReplans)
                throw Error("replan budget exceeded");
            ++state.replansUsed;
            transition(state, Phase::Replanning);
            break;
        }

        case EventKind::SynthesisDone:
            requirePhase(state, { Phase::Evaluating }, event.kind);
            if (!state.plan || !state.plan->allAchieved())
                throw Error("synthesis before every step was achieved");
            state.answer = p.at("answer").get<std::string>();
            transition(state, Phase::Synthesizing);
            break;

        case EventKind::RunFinished: {
            auto const outcome = p.at("outcome").get<RunOutcome>();
            state.diagnostic = outcome.diagnostic;
            transition(state, outcome.status == RunStatus::Solved ? Phase::Done : Phase::Failed);
            break;
        }

        case EventKind::ExpertIteration:
        case EventKind::ToolInvoked:
        case EventKind::AssistanceRequested:
        case EventKind::AssistanceReceived:
            // Step-internal detail; the manager state only changes on the report.
            if (state.phase == Phase::Done || state.phase == Phase::Failed)
                throw Error(fmt::format("{} after the run finished", toString(event.kind)));
            break;
    }
    return state;
}

RunOutcome outcomeOf(const ManagerState& state, std::string traceRef)
{
    auto outcome = RunOutcome {};
    outcome.status = state.phase == Phase::Done ? RunStatus::Solved : RunStatus::Unsolved;
    if (outcome.status == RunStatus::Solved)
        outcome.answer = state.answer;
    outcome.planVersions = state.plan ? state.plan->version : 0;
    outcome.traceRef = std::move(traceRef);
    outcome.diagnostic = state.diagnostic;
    return outcome;
}

ReplayResult replay(const std::vector<TraceEvent>& events, std::string traceRef)
{
    auto result = ReplayResult {};
    for (std::size_t i = 0; i < events.size(); ++i)
    {
        auto const& event = events[i];
        if (event.seq != i)
            throw ReplayError(i, fmt::format("sequence gap (found seq {})", event.seq));
        if (result.complete)
            throw ReplayError(event.seq, "event after run_finished");
        try
        {
            result.state = applyEvent(std::move(result.state), event);
        }
        catch (const ReplayError&)
        {
            throw;
        }
        catch (const std::exception& e)
        {
            throw ReplayError(event.seq, e.what());
        }

        if (event.kind == EventKind::RunFinished)
        {
            auto recorded = event.payload.at("outcome").get<RunOutcome>();
            auto rebuilt = outcomeOf(result.state, recorded.traceRef);
            if (rebuilt != recorded)
                throw ReplayError(event.seq, "recorded outcome differs from the reconstructed one");
            if (!traceRef.empty())
                rebuilt.traceRef = traceRef;
            result.outcome = std::move(rebuilt);
            result.complete = true;
        }
    }
    return result;
}

ReplayResult replayFile(const std::filesystem::path& path)
{
    return replay(readTrace(path), path.string());
}

} // namespace pathfinder
