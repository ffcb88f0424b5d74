// SPDX-License-Identifier: Apache-2.0
#include <pathfinder/state.hpp>
#include <pathfinder/errors.hpp>

#include "harness.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace pathfinder;
using namespace pathfinder::testing;

namespace
{

PlanStep step(std::string id, std::vector<std::string> deps = {})
{
    auto s = PlanStep {};
    s.id = std::move(id);
    s.task = "task " + s.id;
    s.goal = "goal " + s.id;
    s.expertRole = "analyst";
    s.dependsOn = std::move(deps);
    return s;
}

ManagerState executing(std::uint32_t maxReplans = 2)
{
    auto st = ManagerState {};
    st.phase = Phase::Executing;
    st.config.maxReplans = maxReplans;
    auto plan = Plan {};
    plan.version = 1;
    plan.steps = { step("s1"), step("s2", { "s1" }) };
    st.plan = plan;
    return st;
}

FeedbackReport achieved(std::string id, std::uint32_t version = 1, std::uint32_t iterations = 2)
{
    auto r = FeedbackReport {};
    r.stepId = std::move(id);
    r.planVersion = version;
    r.status = FeedbackStatus::Achieved;
    r.result = StepResult { "answer " + r.stepId, {}, {} };
    r.iterationsUsed = iterations;
    return r;
}

FeedbackReport infeasible(std::string id, std::string constraint = "no data")
{
    auto r = FeedbackReport {};
    r.stepId = std::move(id);
    r.planVersion = 1;
    r.status = FeedbackStatus::Infeasible;
    r.failureReason = constraint;
    r.discoveredConstraints = { Constraint { "v1." + r.stepId + ".c1", constraint, {}, ConstraintOrigin::ExpertFeedback, 1 } };
    r.iterationsUsed = 3;
    return r;
}

TraceEvent ev(std::uint64_t seq, EventKind kind, Json payload)
{
    return TraceEvent { seq, "t", kind, std::move(payload) };
}

auto const allPhases = std::vector<Phase> {
    Phase::Init, Phase::Analyzing, Phase::Planning, Phase::Executing, Phase::Evaluating,
    Phase::Replanning, Phase::Synthesizing, Phase::Done, Phase::Failed,
};

} // namespace

TEST_CASE("phase transition table")
{
    CHECK(isLegalTransition(Phase::Init, Phase::Analyzing));
    CHECK(isLegalTransition(Phase::Analyzing, Phase::Planning));
    CHECK(isLegalTransition(Phase::Planning, Phase::Executing));
    CHECK(isLegalTransition(Phase::Executing, Phase::Evaluating));
    CHECK(isLegalTransition(Phase::Evaluating, Phase::Executing));
    CHECK(isLegalTransition(Phase::Evaluating, Phase::Replanning));
    CHECK(isLegalTransition(Phase::Evaluating, Phase::Synthesizing));
    CHECK(isLegalTransition(Phase::Replanning, Phase::Executing));
    CHECK(isLegalTransition(Phase::Synthesizing, Phase::Done));

    CHECK_FALSE(isLegalTransition(Phase::Init, Phase::Executing));
    CHECK_FALSE(isLegalTransition(Phase::Executing, Phase::Synthesizing));
    CHECK_FALSE(isLegalTransition(Phase::Replanning, Phase::Synthesizing));
    CHECK_FALSE(isLegalTransition(Phase::Planning, Phase::Replanning));

    for (auto const p: allPhases)
    {
        CHECK_FALSE(isLegalTransition(Phase::Done, p));
        CHECK_FALSE(isLegalTransition(Phase::Failed, p));
        if (p != Phase::Init && p != Phase::Done && p != Phase::Failed)
            CHECK(isLegalTransition(p, Phase::Failed));
    }
}

TEST_CASE("decision rule examples")
{
    auto const st = executing();

    auto const first = evaluateFeedback(st, achieved("s1"));
    CHECK(first.decision == Decision::Proceed);
    CHECK_FALSE(first.stale);
    CHECK(first.next.plan->findStep("s1")->status == StepStatus::Achieved);
    CHECK(first.next.totalIterations == 2);

    auto const second = evaluateFeedback(first.next, achieved("s2"));
    CHECK(second.decision == Decision::Synthesize);
    CHECK(second.next.totalIterations == 4);

    auto const bad = evaluateFeedback(st, infeasible("s1"));
    CHECK(bad.decision == Decision::Replan);
    CHECK(bad.next.plan->findStep("s1")->status == StepStatus::Infeasible);
    REQUIRE(bad.next.knowledge.constraints.size() == 1);
    CHECK(bad.next.knowledge.constraints[0].description == "no data");

    auto spent = executing(2);
    spent.replansUsed = 2;
    CHECK(evaluateFeedback(spent, infeasible("s1")).decision == Decision::Abort);
    CHECK(evaluateFeedback(executing(0), infeasible("s1")).decision == Decision::Abort);

    auto exhausted = infeasible("s1");
    exhausted.status = FeedbackStatus::BudgetExhausted;
    CHECK(evaluateFeedback(st, exhausted).decision == Decision::Replan);
}

TEST_CASE("stale reports only count iterations")
{
    auto const st = executing();
    auto stale = infeasible("s1");
    stale.planVersion = 7;
    auto const e = evaluateFeedback(st, stale);
    CHECK(e.stale);
    CHECK_FALSE(e.decision.has_value());
    CHECK(e.next.totalIterations == 3);
    auto expected = st;
    expected.totalIterations = 3;
    CHECK(e.next == expected);
}

TEST_CASE("reports for unknown or finished steps are invalid")
{
    auto const st = executing();
    CHECK_THROWS_AS(evaluateFeedback(st, achieved("zz")), InvalidReport);
    auto const once = evaluateFeedback(st, achieved("s1")).next;
    CHECK_THROWS_AS(evaluateFeedback(once, achieved("s1")), InvalidReport);
    CHECK_THROWS_AS(evaluateFeedback(ManagerState {}, achieved("s1")), PreconditionViolation);
}

TEST_CASE("combine picks the severest decision")
{
    auto const order = std::vector { Decision::Proceed, Decision::Synthesize, Decision::Replan, Decision::Abort };
    for (auto i = std::size_t { 0 }; i < order.size(); ++i)
        for (auto j = std::size_t { 0 }; j < order.size(); ++j)
        {
            CHECK(combine(order[i], order[j]) == order[std::max(i, j)]);
            CHECK(combine(order[i], order[j]) == combine(order[j], order[i]));
        }
    for (auto const d: order)
        CHECK(parseDecision(toString(d)) == d);
    CHECK_FALSE(parseDecision("dance").has_value());
}

TEST_CASE("the iteration total is monotone over random report sequences")
{
    auto rng = std::mt19937(17);
    for (auto trial = 0; trial < 100; ++trial)
    {
        auto st = executing(3);
        auto last = 0u;
        for (auto i = 0; i < 6; ++i)
        {
            auto r = rng() % 2 ? achieved("s1", 1 + rng() % 2, 1 + rng() % 4) : infeasible("s1");
            try
            {
                st = evaluateFeedback(st, r).next;
            }
            catch (const InvalidReport&)
            {
                continue;
            }
            CHECK(st.totalIterations >= last);
            last = st.totalIterations;
        }
    }
}

TEST_CASE("reducer rejects inconsistent events")
{
    auto const planPayload = [](std::uint32_t version) {
        auto plan = Plan {};
        plan.version = version;
        plan.steps = { step("s1") };
        return Json { { "plan", plan } };
    };

    auto st = ManagerState {};
    CHECK_THROWS_WITH(applyEvent(st, ev(0, EventKind::PlanCreated, planPayload(1))),
                      Catch::Matchers::ContainsSubstring("not allowed in phase"));

    st = applyEvent(st, ev(0, EventKind::RunStarted, Json { { "problem", revenueProblem() }, { "config", RunConfig {} } }));
    CHECK(st.phase == Phase::Analyzing);
    CHECK_THROWS_WITH(applyEvent(st, ev(1, EventKind::RunStarted, Json { { "problem", revenueProblem() }, { "config", RunConfig {} } })),
                      Catch::Matchers::ContainsSubstring("run_started after the run began"));

    st = applyEvent(st, ev(1, EventKind::AnalysisDone, Json { { "analysis", ProblemAnalysis {} } }));
    CHECK(st.phase == Phase::Planning);
    CHECK_THROWS_WITH(applyEvent(st, ev(2, EventKind::PlanCreated, planPayload(2))),
                      Catch::Matchers::ContainsSubstring("plan version 2 where 1 was expected"));

    st = applyEvent(st, ev(2, EventKind::PlanCreated, planPayload(1)));
    CHECK(st.phase == Phase::Executing);
    CHECK_THROWS_WITH(applyEvent(st, ev(3, EventKind::SynthesisDone, Json { { "answer", "x" } })),
                      Catch::Matchers::ContainsSubstring("not allowed in phase"));
    CHECK_THROWS_WITH(applyEvent(st, ev(3, EventKind::StepDispatched, Json { { "plan_version", 1 }, { "step_id", "nope" } })),
                      Catch::Matchers::ContainsSubstring("not pending"));

    st = applyEvent(st, ev(3, EventKind::StepDispatched, Json { { "plan_version", 1 }, { "step_id", "s1" } }));
    auto lie = Json { { "report", achieved("s1") }, { "stale", false }, { "decision", "replan" } };
    CHECK_THROWS_WITH(applyEvent(st, ev(4, EventKind::FeedbackSubmitted, lie)),
                      Catch::Matchers::ContainsSubstring("does not match the decision rule"));

    auto failed = Json { { "report", infeasible("s1") }, { "stale", false }, { "decision", "replan" } };
    auto evaluating = applyEvent(st, ev(4, EventKind::FeedbackSubmitted, failed));
    CHECK(evaluating.phase == Phase::Evaluating);
    CHECK_THROWS_WITH(applyEvent(evaluating, ev(5, EventKind::SynthesisDone, Json { { "answer", "x" } })),
                      Catch::Matchers::ContainsSubstring("synthesis before every step was achieved"));

    evaluating.config.maxReplans = 0;
    CHECK_THROWS_WITH(applyEvent(evaluating, ev(5, EventKind::ReplanTriggered, Json::object())),
                      Catch::Matchers::ContainsSubstring("replan budget exceeded"));
}

TEST_CASE("replay of a complete run reproduces the live state")
{
    auto h = Harness {};
    auto const run = h.run(replanScenario().scenario());
    auto const r = replay(run.events, "ref");
    CHECK(r.complete);
    CHECK(r.state == run.state);
    REQUIRE(r.outcome.has_value());
    CHECK(r.outcome->status == run.outcome.status);
    CHECK(r.outcome->answer == run.outcome.answer);
    CHECK(r.outcome->traceRef == "ref");
}

TEST_CASE("replay of a truncated log is incomplete")
{
    auto h = Harness {};
    auto const run = h.run(happyScenario().scenario());
    auto prefix = run.events;
    prefix.pop_back();
    auto const r = replay(prefix);
    CHECK_FALSE(r.complete);
    CHECK_FALSE(r.outcome.has_value());
    CHECK(r.state.phase == Phase::Synthesizing);
}

TEST_CASE("replay errors name the offending seq")
{
    auto h = Harness {};
    auto const run = h.run(happyScenario().scenario());

    SECTION("gap")
    {
        auto events = run.events;
        events.erase(events.begin() + 3);
        try
        {
            (void) replay(events);
            FAIL("expected ReplayError");
        }
        catch (const ReplayError& e)
        {
            CHECK(e.seq() == 3);
        }
    }
    SECTION("tampered outcome")
    {
        auto events = run.events;
        events.back().payload["outcome"]["answer"] = "something else";
        try
        {
            (void) replay(events);
            FAIL("expected ReplayError");
        }
        catch (const ReplayError& e)
        {
            CHECK(e.seq() == events.back().seq);
        }
    }
    SECTION("event after finish")
    {
        auto events = run.events;
        auto extra = events.back();
        extra.seq += 1;
        events.push_back(extra);
        CHECK_THROWS_AS(replay(events), ReplayError);
    }
    SECTION("reducer failure is wrapped")
    {
        auto events = run.events;
        auto& e = events.at(1);
        REQUIRE(e.kind == EventKind::AnalysisDone);
        e.kind = EventKind::SynthesisDone;
        try
        {
            (void) replay(events);
            FAIL("expected ReplayError");
        }
        catch (const ReplayError& err)
        {
            CHECK(err.seq() == 1);
        }
    }
}

TEST_CASE("outcome derivation")
{
    auto st = ManagerState {};
    st.phase = Phase::Done;
    st.answer = "42";
    auto plan = Plan {};
    plan.version = 3;
    st.plan = plan;
    auto const o = outcomeOf(st, "t.jsonl");
    CHECK(o.status == RunStatus::Solved);
    CHECK(o.answer == "42");
    CHECK(o.planVersions == 3);
    st.phase = Phase::Failed;
    st.diagnostic = "replan budget exhausted";
    auto const f = outcomeOf(st, "t.jsonl");
    CHECK(f.status == RunStatus::Unsolved);
    CHECK_FALSE(f.answer.has_value());
    CHECK(f.diagnostic == "replan budget exhausted");
}
