// SPDX-License-Identifier: Apache-2.0
#include <pathfinder/hitl.hpp>
#include <pathfinder/errors.hpp>

#include "harness.hpp"

#include <catch_amalgamated.hpp>
#include <httplib.h>

#include <atomic>
#include <random>
#include <thread>

using namespace pathfinder;
using namespace pathfinder::testing;
using namespace std::chrono_literals;
using Catch::Matchers::ContainsSubstring;

namespace
{

AssistanceRequest request(std::string run, std::string step = "s1")
{
    auto r = AssistanceRequest {};
    r.runId = std::move(run);
    r.planVersion = 1;
    r.stepId = std::move(step);
    r.iteration = 2;
    r.question = "which fiscal year?";
    r.excerpt = { "observation one" };
    return r;
}

Json startedPayload(std::string_view runId)
{
    return Json { { "run_id", runId }, { "problem", revenueProblem() }, { "config", RunConfig {} } };
}

// Parses "id: N" lines out of an SSE body.
std::vector<std::uint64_t> sseIds(const std::string& body)
{
    auto ids = std::vector<std::uint64_t> {};
    auto pos = std::size_t { 0 };
    while ((pos = body.find("id: ", pos)) != std::string::npos)
    {
        pos += 4;
        ids.push_back(std::stoull(body.substr(pos, body.find('\n', pos) - pos)));
    }
    return ids;
}

struct Gateway
{
    HitlService service;
    Gateway() { service.start("127.0.0.1", 0); }
    ~Gateway() { service.stop(); }
    httplib::Client client() const
    {
        auto c = httplib::Client("127.0.0.1", service.port());
        c.set_read_timeout(10, 0);
        return c;
    }
};

} // namespace

TEST_CASE("registry assigns sequential ids")
{
    auto reg = AssistanceRegistry {};
    CHECK(reg.open(request("r")) == "R1");
    CHECK(reg.open(request("r")) == "R2");
    CHECK(reg.open(request("other")) == "R3");
    auto const open = reg.openRequests("r");
    REQUIRE(open.size() == 2);
    CHECK(open[0].id == "R1");
    CHECK(open[1].id == "R2");
}

TEST_CASE("registry submit outcomes")
{
    auto reg = AssistanceRegistry {};
    auto const id = reg.open(request("r"));
    CHECK(reg.submit("wrong-run", id, { "x", "a" }) == SubmitResult::UnknownRequest);
    CHECK(reg.submit("r", "R99", { "x", "a" }) == SubmitResult::UnknownRequest);
    CHECK(reg.submit("r", id, { "use 2020", "ada" }) == SubmitResult::Accepted);
    CHECK(reg.submit("r", id, { "second", "bob" }) == SubmitResult::AlreadyAnswered);
    auto const reply = reg.await(id, 10ms);
    REQUIRE(reply.has_value());
    CHECK(reply->text == "use 2020");
    CHECK(reply->author == "ada");
    CHECK(reg.openRequests("r").empty());
    CHECK_THROWS_AS(reg.await("R42", 1ms), GatewayUnavailable);
}

TEST_CASE("a reply after the timeout is rejected")
{
    auto reg = AssistanceRegistry {};
    auto const id = reg.open(request("r"));
    CHECK_FALSE(reg.await(id, 5ms).has_value());
    CHECK(reg.submit("r", id, { "late", "ada" }) == SubmitResult::AlreadyAnswered);
    CHECK_FALSE(reg.await(id, 1ms).has_value());
}

TEST_CASE("each request resolves exactly once under racing replies")
{
    auto rng = std::mt19937(99);
    for (auto trial = 0; trial < 60; ++trial)
    {
        auto reg = AssistanceRegistry {};
        auto const id = reg.open(request("r"));
        auto const timeout = std::chrono::milliseconds(rng() % 6);
        auto delays = std::vector<int> {};
        for (auto i = 0; i < 4; ++i)
            delays.push_back(static_cast<int>(rng() % 8));

        auto accepted = std::atomic<int> { 0 };
        auto acceptedText = std::string {};
        auto textMutex = std::mutex {};
        auto result = std::optional<HumanReply> {};
        {
            auto threads = std::vector<std::jthread> {};
            threads.emplace_back([&] { result = reg.await(id, timeout); });
            for (auto i = 0; i < 4; ++i)
                threads.emplace_back([&, i] {
                    std::this_thread::sleep_for(std::chrono::milliseconds(delays[i]));
                    auto const text = "reply " + std::to_string(i);
                    if (reg.submit("r", id, { text, "h" }) == SubmitResult::Accepted)
                    {
                        ++accepted;
                        auto const lock = std::lock_guard(textMutex);
                        acceptedText = text;
                    }
                });
        }
        CHECK(accepted.load() <= 1);
        if (result)
        {
            CHECK(accepted.load() == 1);
            CHECK(result->text == acceptedText);
        }
        else
        {
            CHECK(accepted.load() == 0);
        }
    }
}

TEST_CASE("subscribers get identical ordered streams")
{
    auto service = HitlService {};
    auto store = TraceStore {};
    (void) store.append(EventKind::RunStarted, startedPayload("r1"));
    service.attach("r1", store);

    auto early = std::vector<std::uint64_t> {};
    auto const token = service.subscribe("r1", [&](const TraceEvent& e) { early.push_back(e.seq); });
    (void) store.append(EventKind::AnalysisDone, Json { { "analysis", ProblemAnalysis {} } });

    auto late = std::vector<std::uint64_t> {};
    (void) service.subscribe("r1", [&](const TraceEvent& e) { late.push_back(e.seq); });
    (void) store.append(EventKind::ExpertIteration, Json::object());
    service.unsubscribe(token);
    (void) store.append(EventKind::ExpertIteration, Json::object());

    CHECK(early == std::vector<std::uint64_t> { 0, 1, 2 });
    CHECK(late == std::vector<std::uint64_t> { 0, 1, 2, 3 });
    CHECK(service.events("r1").size() == 4);
    CHECK(service.knowsRun("r1"));
    CHECK_FALSE(service.knowsRun("r2"));

    auto const runs = service.runs();
    REQUIRE(runs.size() == 1);
    CHECK(runs[0].runId == "r1");
    CHECK(runs[0].phase == Phase::Planning);
    CHECK(runs[0].events == 4);
    CHECK_FALSE(runs[0].finished);
}

TEST_CASE("duplicate deliveries are ignored")
{
    auto service = HitlService {};
    auto store = TraceStore {};
    auto const e = store.append(EventKind::RunStarted, startedPayload("r"));
    service.publish("r", e);
    service.publish("r", e);
    CHECK(service.events("r").size() == 1);
}

TEST_CASE("HTTP run list and assistance endpoints")
{
    auto gw = Gateway {};
    auto store = TraceStore {};
    (void) store.append(EventKind::RunStarted, startedPayload("r1"));
    gw.service.attach("r1", store);
    auto const id = gw.service.open(request("r1"));
    auto client = gw.client();

    auto list = client.Get("/runs");
    REQUIRE(list);
    CHECK(list->status == 200);
    auto const runs = Json::parse(list->body);
    REQUIRE(runs.size() == 1);
    CHECK(runs[0].at("run_id") == "r1");
    CHECK(runs[0].at("phase") == "analyzing");

    auto open = client.Get("/runs/r1/assistance");
    REQUIRE(open);
    CHECK(open->status == 200);
    auto const pending = Json::parse(open->body);
    REQUIRE(pending.size() == 1);
    CHECK(pending[0].at("request_id") == id);
    CHECK(pending[0].at("question") == "which fiscal year?");
    CHECK(client.Get("/runs/nope/assistance")->status == 404);

    auto const post = [&](std::string path, std::string body) { return client.Post(path, body, "application/json"); };
    CHECK(post("/runs/r1/assistance/" + id, "not json")->status == 400);
    CHECK(post("/runs/r1/assistance/" + id, R"({"author":"x"})")->status == 400);
    CHECK(post("/runs/r1/assistance/" + id, R"({"text":"   "})")->status == 400);
    CHECK(post("/runs/r1/assistance/R77", R"({"text":"a"})")->status == 404);
    CHECK(post("/runs/r2/assistance/" + id, R"({"text":"a"})")->status == 404);

    auto ok = post("/runs/r1/assistance/" + id, R"({"text":"use FY2020","author":"ada"})");
    REQUIRE(ok);
    CHECK(ok->status == 200);
    CHECK(Json::parse(ok->body).at("status") == "accepted");

    auto again = post("/runs/r1/assistance/" + id, R"({"text":"again"})");
    CHECK(again->status == 409);
    CHECK_THAT(again->body, ContainsSubstring("already answered"));

    auto const reply = gw.service.await(id, 10ms);
    REQUIRE(reply);
    CHECK(reply->text == "use FY2020");
    CHECK(reply->author == "ada");
}

TEST_CASE("SSE stream replays history then follows live events")
{
    auto gw = Gateway {};
    auto store = TraceStore {};
    (void) store.append(EventKind::RunStarted, startedPayload("r1"));
    (void) store.append(EventKind::AnalysisDone, Json { { "analysis", ProblemAnalysis {} } });
    gw.service.attach("r1", store);

    auto body = std::string {};
    auto reader = std::thread([&] {
        auto client = gw.client();
        auto res = client.Get("/runs/r1/events", [&](const char* data, std::size_t n) {
            body.append(data, n);
            return true;
        });
        CHECK(res);
    });

    std::this_thread::sleep_for(100ms);
    (void) store.append(EventKind::ExpertIteration, Json::object());
    (void) store.append(EventKind::RunFinished,
                        Json { { "outcome", RunOutcome { RunStatus::Unsolved, std::nullopt, 0, "", "stopped" } } });
    reader.join();

    CHECK(sseIds(body) == std::vector<std::uint64_t> { 0, 1, 2, 3 });
    CHECK_THAT(body, ContainsSubstring("event: run_started"));
    CHECK_THAT(body, ContainsSubstring("event: run_finished"));

    auto client = gw.client();
    auto resumed = client.Get("/runs/r1/events", httplib::Headers { { "Last-Event-ID", "1" } });
    REQUIRE(resumed);
    CHECK(sseIds(resumed->body) == std::vector<std::uint64_t> { 2, 3 });
    auto from = client.Get("/runs/r1/events?from=3");
    REQUIRE(from);
    CHECK(sseIds(from->body) == std::vector<std::uint64_t> { 3 });
    CHECK(client.Get("/runs/ghost/events")->status == 404);
}

TEST_CASE("an occupied port is a configuration error naming it")
{
    auto first = Gateway {};
    auto const taken = first.service.port();
    REQUIRE(taken > 0);
    auto second = HitlService {};
    try
    {
        second.start("127.0.0.1", taken);
        FAIL("expected ConfigError");
    }
    catch (const ConfigError& e)
    {
        CHECK_THAT(e.what(), ContainsSubstring(std::to_string(taken)));
    }
}

TEST_CASE("a blocked step resumes with the human reply")
{
    auto service = HitlService {};
    auto h = Harness {};
    h.config.hitlEnabled = true;
    h.config.humanResponseTimeout = 10s;
    h.assistance = &service;
    h.onStore = [&](TraceStore& store) { service.attach("hitl-run", store); };

    auto b = ScenarioBuilder {};
    b.analyzer(analysisReply());
    b.planner(1, planReply({ stepJson("s1") }));
    b.expert(1, "s1", 1, assistanceReply("which fiscal year?"));
    b.expert(1, "s1", 2, achievedReply("FY2020"));
    b.manager(1, "FY2020 it is");

    auto responder = std::jthread([&](std::stop_token stop) {
        while (!stop.stop_requested())
        {
            for (auto const& r: service.openRequests("hitl-run"))
                (void) service.submitResponse("hitl-run", r.id, { "use fiscal year 2020", "ada" });
            std::this_thread::sleep_for(2ms);
        }
    });
    auto const run = h.run(b.scenario(), revenueProblem(), "hitl-run");
    responder.request_stop();

    CHECK(run.outcome.status == RunStatus::Solved);
    auto const received = run.ofKind(EventKind::AssistanceReceived);
    REQUIRE(received.size() == 1);
    CHECK(received[0]->payload.at("text") == "use fiscal year 2020");
    CHECK(received[0]->payload.at("author") == "ada");
    CHECK(received[0]->payload.at("timed_out") == false);
    CHECK(received[0]->payload.at("request_id") == "R1");

    auto expertText = std::string {};
    for (auto const& r: run.requests)
        if (r.caller.agentRole != "manager" && r.caller.iteration == 2 && r.caller.stepId == "s1")
            for (auto const& m: r.messages)
                expertText += m.content;
    CHECK_THAT(expertText, ContainsSubstring("use fiscal year 2020"));

    CHECK(service.events("hitl-run").size() == run.events.size());
    CHECK(service.runs().at(0).finished);
}
