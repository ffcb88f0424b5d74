// SPDX-License-Identifier: Apache-2.0
#include <pathfinder/serialize.hpp>
#include <pathfinder/state.hpp>

#include <catch_amalgamated.hpp>

#include <random>

using namespace pathfinder;

namespace
{

template <typename T>
T roundTrip(const T& value)
{
    auto const text = Json(value).dump();
    return Json::parse(text).get<T>();
}

std::string word(std::mt19937& rng)
{
    static auto const words = std::vector<std::string> { "revenue", "10-K", "ünïcode", "q\"uote", "line\nbreak", "", "x" };
    return words[rng() % words.size()];
}

Plan randomPlan(std::mt19937& rng)
{
    auto plan = Plan {};
    plan.version = 1 + rng() % 5;
    if (plan.version > 1)
        plan.supersedes = plan.version - 1;
    plan.rationale = word(rng);
    for (auto i = 0u; i < rng() % 5; ++i)
    {
        auto s = PlanStep {};
        s.id = "s" + std::to_string(i);
        s.task = word(rng);
        s.goal = word(rng);
        s.expertRole = "analyst";
        if (i > 0)
            s.dependsOn = { "s0" };
        s.status = static_cast<StepStatus>(rng() % 5);
        if (s.status == StepStatus::Achieved)
            s.result = StepResult { word(rng), { { "k", word(rng) } }, { word(rng) } };
        plan.steps.push_back(s);
    }
    return plan;
}

FeedbackReport randomReport(std::mt19937& rng)
{
    auto r = FeedbackReport {};
    r.stepId = "s" + std::to_string(rng() % 4);
    r.planVersion = 1 + rng() % 3;
    r.status = static_cast<FeedbackStatus>(rng() % 3);
    if (r.status == FeedbackStatus::Achieved)
        r.result = StepResult { word(rng), {}, {} };
    else
        r.failureReason = word(rng);
    auto const scope = rng() % 2 ? ConstraintScope::global() : ConstraintScope::stepLocal("s1");
    r.discoveredConstraints.push_back(Constraint { "v1.s1.c1", word(rng), scope, ConstraintOrigin::ExpertFeedback, r.planVersion });
    r.attemptedAlternatives.push_back(AttemptedAlternative { word(rng), word(rng) });
    r.insights = { word(rng) };
    r.iterationsUsed = 1 + rng() % 8;
    r.toolCalls = rng() % 8;
    return r;
}

} // namespace

TEST_CASE("protocol values round-trip through JSON")
{
    auto rng = std::mt19937(3);
    for (auto trial = 0; trial < 200; ++trial)
    {
        auto const plan = randomPlan(rng);
        CHECK(roundTrip(plan) == plan);
        auto const report = randomReport(rng);
        CHECK(roundTrip(report) == report);

        auto state = KnowledgeState {};
        state.constraints = report.discoveredConstraints;
        state.deadEnds = { DeadEnd { 2, "s1", word(rng) } };
        state.insights = { word(rng) };
        state.feedbackHistory = { report };
        CHECK(roundTrip(state) == state);
    }
}

TEST_CASE("problem, analysis and config round-trip")
{
    auto const problem = Problem { "p1", "What was revenue?", { "doc-a" }, { { "max_replans", "1" } } };
    CHECK(roundTrip(problem) == problem);

    auto const analysis = ProblemAnalysis {
        { Constraint { "a1", "use GAAP", {}, ConstraintOrigin::Analysis, 0 } }, { "find revenue" }, { "calendar year" }, "restated",
    };
    CHECK(roundTrip(analysis) == analysis);

    auto config = RunConfig {};
    config.maxReplans = 7;
    config.humanResponseTimeout = std::chrono::milliseconds(1500);
    config.hitlEnabled = true;
    config.backend.kind = BackendKind::Live;
    config.backend.model = "m";
    config.backend.retries = 9;
    config.transcriptWindow = 3;
    config.parallelSteps = 2;
    config.temperature = 0.5;
    config.maxTokens = 77;
    CHECK(roundTrip(config) == config);
}

TEST_CASE("wire field names")
{
    auto r = FeedbackReport {};
    r.stepId = "s1";
    r.status = FeedbackStatus::BudgetExhausted;
    r.failureReason = "iteration budget exhausted";
    auto const j = Json(r);
    CHECK(j.at("step_id") == "s1");
    CHECK(j.at("status") == "budget_exhausted");
    CHECK(j.at("plan_version") == 1);
    CHECK(j.contains("discovered_constraints"));
    CHECK(j.contains("iterations_used"));

    auto c = Constraint { "id", "d", ConstraintScope::stepLocal("s2"), ConstraintOrigin::Human, 3 };
    auto const cj = Json(c);
    CHECK(cj.at("origin") == "human");
    CHECK(cj.at("plan_version_discovered") == 3);
    CHECK(cj.at("scope") == Json { { "type", "step_local" }, { "step_id", "s2" } });
    CHECK(Json(ConstraintScope::global()) == Json { { "type", "global" } });
    CHECK(Json("global").get<ConstraintScope>().isGlobal());
}

TEST_CASE("unknown enum text is rejected")
{
    auto bad = Json { { "step_id", "s" }, { "status", "maybe" } };
    CHECK_THROWS(bad.get<FeedbackReport>());
}

TEST_CASE("scalar helpers")
{
    CHECK(scalarText(Json("x")) == "x");
    CHECK(scalarText(Json(42)) == "42");
    CHECK(scalarText(Json(true)) == "true");
    CHECK(stringOr(Json { { "a", nullptr } }, "a", "fb") == "fb");
    CHECK(stringOr(Json::object(), "a") == "");
}

TEST_CASE("run outcome JSON")
{
    auto const o = RunOutcome { RunStatus::Solved, "4.8%", 2, "traces/r.jsonl", "" };
    auto const j = Json(o);
    CHECK(j.at("status") == "solved");
    CHECK(j.at("plan_versions") == 2);
    CHECK(j.get<RunOutcome>() == o);
    auto const u = RunOutcome { RunStatus::Unsolved, std::nullopt, 1, "t", "why" };
    CHECK(Json(u).at("answer").is_null());
    CHECK(Json(u).get<RunOutcome>() == u);
}
