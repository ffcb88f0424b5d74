// SPDX-License-Identifier: Apache-2.0
#include <pathfinder/manager.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <future>

namespace pathfinder
{

const Schema& synthesisSchema()
{
    static auto const schema = Schema { "synthesis", { { "answer", FieldKind::Any } } };
    return schema;
}

std::string synthesize(const Plan& plan, const Problem& problem, const ProblemAnalysis& analysis, AgentEnvironment env)
{
    if (plan.steps.empty())
        throw PreconditionViolation("cannot synthesize from a plan with no steps");
    if (!plan.allAchieved())
        throw PreconditionViolation("cannot synthesize before every step is achieved");

    auto results = std::string {};
    for (auto const& step: plan.steps)
    {
        results += fmt::format("- {} ({}): {}\n", step.id, step.task, step.result->answer);
        for (auto const& [name, value]: step.result->artifacts)
            results += fmt::format("    {} = {}\n", name, value);
    }
    results.pop_back();

    auto const system = env.prompts.render("synthesizer",
                                           {
                                               { "question", problem.question },
                                               { "restatement", analysis.restatement },
                                               { "step_results", results },
                                               { "schema", synthesisSchema().describe() },
                                           });
    auto request = CompletionRequest {
        .messages = { ChatMessage { ChatRole::System, system }, ChatMessage { ChatRole::User, problem.question } },
        .schema = synthesisSchema(),
        .temperature = env.temperature,
        .maxTokens = env.maxTokens,
        .caller = CallerKey { std::string(agent::Manager), plan.version, {}, 1 },
    };

    auto answer = std::string {};
    try
    {
        answer = scalarText(completeStructured(env.backend, request).value.at("answer"));
    }
    catch (const ParseFailure& e)
    {
        throw SynthesisFailure(fmt::format("synthesis failed: {}", e.what()));
    }
    if (normalizeText(answer).empty())
        throw SynthesisFailure("synthesis failed: empty answer");
    return answer;
}

namespace
{
    // Owns the live state; every mutation goes through the reducer.
    class Run
    {
      public:
        Run(const RunConfig& config, RunServices& services, TraceStore& trace, std::string runId):
            _config(config), _services(services), _trace(trace), _runId(std::move(runId))
        {
        }

        RunResult execute(const Problem& problem)
        {
            emit(EventKind::RunStarted, Json { { "run_id", _runId }, { "problem", problem }, { "config", _config } });
            try
            {
                drive();
            }
            catch (const TraceWriteError&)
            {
                throw;
            }
            catch (const RunClosed&)
            {
                throw;
            }
            catch (const std::exception& e)
            {
                if (!_trace.closed())
                    finish(RunStatus::Unsolved, e.what());
            }
            return { outcomeOf(_state, traceRef()), _state };
        }

      private:
        AgentEnvironment env() const
        {
            return { _services.backend, _services.prompts, _config.temperature, _config.maxTokens };
        }

        std::string traceRef() const { return _trace.path().string(); }

        void emit(EventKind kind, Json payload)
        {
            auto const event = _trace.append(kind, std::move(payload));
            _state = applyEvent(std::move(_state), event);
        }

        void finish(RunStatus status, std::string diagnostic)
        {
            auto preview = _state;
            preview.phase = status == RunStatus::Solved ? Phase::Done : Phase::Failed;
            preview.diagnostic = std::move(diagnostic);
            emit(EventKind::RunFinished, Json { { "outcome", outcomeOf(preview, traceRef()) } });
        }

        void drive()
        {
            auto analysis = ProblemAnalysis {};
            try
            {
                analysis = analyze(_state.problem, _services.documentTitles, env());
            }
            catch (const AnalysisFailure& e)
            {
                return finish(RunStatus::Unsolved, e.what());
            }
            emit(EventKind::AnalysisDone, Json { { "analysis", analysis } });

            try
            {
                auto plan = planInitial(*_state.analysis, _services.roster, _state.knowledge, env());
                emit(EventKind::PlanCreated, Json { { "plan", plan } });
            }
            catch (const PlanningFailure& e)
            {
                return finish(RunStatus::Unsolved, e.what());
            }

            while (true)
            {
                auto const& plan = *_state.plan;
                if (_state.totalIterations >= _config.maxTotalIterations)
                    return finish(RunStatus::Unsolved,
                                  fmt::format("total iteration budget exhausted ({} of {})",
                                              _state.totalIterations,
                                              _config.maxTotalIterations));

                auto const ready = selectReadySteps(plan);
                if (ready.empty())
                    return finish(RunStatus::Unsolved, "no dispatchable step remains");

                auto const wave = dispatchWave(ready);
                auto const reports = runWave(wave);

                auto decision = Decision::Proceed;
                auto trigger = std::optional<FeedbackReport> {};
                for (auto const& report: reports)
                {
                    auto const evaluation = evaluateFeedback(_state, report);
                    auto payload = Json {
                        { "report", report },
                        { "stale", evaluation.stale },
                        { "decision", evaluation.decision ? Json(toString(*evaluation.decision)) : Json(nullptr) },
                    };
                    if (evaluation.stale)
                        payload["warning"] = fmt::format("stale report for plan v{} dropped", report.planVersion);
                    emit(EventKind::FeedbackSubmitted, std::move(payload));
                    if (!evaluation.decision)
                        continue;
                    decision = combine(decision, *evaluation.decision);
                    if (report.status != FeedbackStatus::Achieved && !trigger)
                        trigger = report;
                }

                switch (decision)
                {
                    case Decision::Proceed: break;
                    case Decision::Abort:
                        return finish(RunStatus::Unsolved,
                                      fmt::format("step {} not achieved and replan budget exhausted ({} of {}): {}",
                                                  trigger->stepId,
                                                  _state.replansUsed,
                                                  _config.maxReplans,
                                                  trigger->failureReason.value_or("")));
                    case Decision::Replan:
                        if (!replanAfter(*trigger))
                            return;
                        break;
                    case Decision::Synthesize: {
                        auto answer = std::string {};
                        try
                        {
                            answer = synthesize(*_state.plan, _state.problem, *_state.analysis, env());
                        }
                        catch (const SynthesisFailure& e)
                        {
                            return finish(RunStatus::Unsolved, e.what());
                        }
                        emit(EventKind::SynthesisDone, Json { { "answer", answer } });
                        return finish(RunStatus::Solved, {});
                    }
                }
            }
        }

        struct Assignment
        {
            PlanStep step;
            std::uint32_t budget = 0;
        };

        std::vector<Assignment> dispatchWave(const std::vector<PlanStep>& ready)
        {
            auto wave = std::vector<Assignment> {};
            auto remaining = _config.maxTotalIterations - _state.totalIterations;
            for (auto const& step: ready)
            {
                if (wave.size() >= _config.parallelSteps || remaining == 0)
                    break;
                auto const budget = std::min(_config.maxExpertIterations, remaining);
                remaining -= budget;
                wave.push_back({ step, budget });
            }
            for (auto const& a: wave)
                emit(EventKind::StepDispatched,
                     Json {
                         { "plan_version", _state.plan->version },
                         { "step_id", a.step.id },
                         { "expert_role", a.step.expertRole },
                         { "budget", a.budget },
                     });
            return wave;
        }

        std::vector<FeedbackReport> runWave(const std::vector<Assignment>& wave)
        {
            // Snapshot taken before any step of the wave runs, so concurrent
            // experts see the same inputs whatever the scheduling.
            auto const state = _state;
            auto prior = std::vector<PlanStep> {};
            for (auto const& step: state.plan->steps)
                if (step.status == StepStatus::Achieved)
                    prior.push_back(step);
            auto const context = ExpertContext { _runId, *state.analysis, state.knowledge, std::move(prior) };
            auto const version = state.plan->version;

            auto const runOne = [&](const Assignment& a) {
                auto services = ExpertServices {
                    _services.backend, _services.prompts, _services.tools, _services.roster,
                    _trace,            _services.assistance, _config,
                };
                auto pending = a.step;
                pending.status = StepStatus::Pending;
                return executeStep(pending, version, context, a.budget, services);
            };

            auto reports = std::vector<FeedbackReport> {};
            if (wave.size() == 1)
            {
                reports.push_back(runOne(wave.front()));
                return reports;
            }
            auto futures = std::vector<std::future<FeedbackReport>> {};
            for (auto const& a: wave)
                futures.push_back(std::async(std::launch::async, runOne, std::cref(a)));
            // Collected in dispatch order; get() rethrows a worker's failure.
            for (auto& f: futures)
                reports.push_back(f.get());
            return reports;
        }

        // Returns false if the run was finished instead.
        bool replanAfter(const FeedbackReport& trigger)
        {
            if (_state.totalIterations >= _config.maxTotalIterations)
            {
                finish(RunStatus::Unsolved,
                       fmt::format("total iteration budget exhausted ({} of {})",
                                   _state.totalIterations,
                                   _config.maxTotalIterations));
                return false;
            }
            auto const from = _state.plan->version;
            emit(EventKind::ReplanTriggered,
                 Json {
                     { "from_version", from },
                     { "to_version", from + 1 },
                     { "step_id", trigger.stepId },
                     { "failure_reason", trigger.failureReason.value_or("") },
                     { "replans_used", _state.replansUsed + 1 },
                 });
            try
            {
                auto plan = replan(*_state.plan, *_state.analysis, _services.roster, _state.knowledge, trigger, env());
                emit(EventKind::PlanCreated, Json { { "plan", plan } });
            }
            catch (const PlanningFailure& e)
            {
                finish(RunStatus::Unsolved, e.what());
                return false;
            }
            return true;
        }

        const RunConfig& _config;
        RunServices& _services;
        TraceStore& _trace;
        std::string _runId;
        ManagerState _state;
    };
} // namespace

RunResult runProblemRecorded(const Problem& problem,
                             const RunConfig& config,
                             RunServices& services,
                             TraceStore& trace,
                             std::string runId)
{
    validateConfig(config);
    services.roster.validate();
    if (normalizeText(problem.question).empty())
        throw PreconditionViolation("problem question must be non-empty");
    return Run(config, services, trace, std::move(runId)).execute(problem);
}

RunOutcome runProblem(const Problem& problem,
                      const RunConfig& config,
                      RunServices& services,
                      TraceStore& trace,
                      std::string runId)
{
    return runProblemRecorded(problem, config, services, trace, std::move(runId)).outcome;
}

} // namespace pathfinder
