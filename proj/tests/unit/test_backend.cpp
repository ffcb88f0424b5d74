// SPDX-License-Identifier: Apache-2.0
#include <pathfinder/backend.hpp>

#include <catch_amalgamated.hpp>
#include <httplib.h>

#include <atomic>
#include <thread>

using namespace pathfinder;

namespace
{

CompletionRequest request(std::uint32_t iteration, std::optional<Schema> schema = std::nullopt)
{
    return CompletionRequest {
        .messages = { ChatMessage { ChatRole::System, "sys" }, ChatMessage { ChatRole::User, "hi" } },
        .schema = std::move(schema),
        .temperature = 0.25,
        .maxTokens = 99,
        .caller = CallerKey { "expert", 1, "s1", iteration },
    };
}

ScriptedScenario fortyTwo(bool strict)
{
    auto s = ScriptedScenario {};
    s.strict = strict;
    s.add(CallerKey { "expert", 1, "s1", 1 }, "42");
    return s;
}

// A local chat-completions stand-in whose replies are chosen per hit.
class MockServer
{
  public:
    explicit MockServer(std::function<void(int hit, const httplib::Request&, httplib::Response&)> handler)
    {
        _server.Post("/v1/chat/completions", [this, handler](const httplib::Request& req, httplib::Response& res) {
            handler(++_hits, req, res);
        });
        _port = _server.bind_to_any_port("127.0.0.1");
        _thread = std::thread([this] { _server.listen_after_bind(); });
        _server.wait_until_ready();
    }

    ~MockServer()
    {
        _server.stop();
        _thread.join();
    }

    [[nodiscard]] std::string url() const { return "http://127.0.0.1:" + std::to_string(_port) + "/v1"; }
    [[nodiscard]] int hits() const { return _hits; }

  private:
    httplib::Server _server;
    std::thread _thread;
    int _port = 0;
    std::atomic<int> _hits { 0 };
};

std::string chatReply(std::string_view content)
{
    return Json { { "choices", Json::array({ Json { { "message", Json { { "role", "assistant" }, { "content", content } } } } }) } }
        .dump();
}

LiveBackendOptions options(std::string url, int retries = 2)
{
    return LiveBackendOptions {
        .baseUrl = std::move(url),
        .model = "test-model",
        .apiKey = "secret",
        .retries = retries,
        .maxInFlight = 2,
        .initialBackoff = std::chrono::milliseconds(1),
        .timeout = std::chrono::seconds(5),
    };
}

} // namespace

TEST_CASE("scripted lookup, strict miss and fallback")
{
    auto strict = ScriptedBackend(fortyTwo(true));
    CHECK(strict.complete(request(1)) == "42");
    try
    {
        (void) strict.complete(request(2));
        FAIL("expected ScenarioMiss");
    }
    catch (const ScenarioMiss& e)
    {
        CHECK(e.key() == "(expert,1,s1,2)");
    }

    auto relaxed = ScriptedBackend(fortyTwo(false));
    CHECK(relaxed.complete(request(2)) == NoScriptFallback);
}

TEST_CASE("scripted backend is a pure function of the key")
{
    auto a = ScriptedBackend(fortyTwo(true));
    auto b = ScriptedBackend(fortyTwo(true));
    for (auto i = 0; i < 5; ++i)
        CHECK(a.complete(request(1)) == b.complete(request(1)));
}

TEST_CASE("scenario documents")
{
    auto const doc = Json::parse(R"({"strict": false, "entries": [
        {"role": "planner", "plan_version": 1, "iteration": 1, "response": {"steps": []}},
        {"role": "expert", "plan_version": 1, "step_id": "s1", "iteration": 2, "response": "text"}]})");
    auto const s = ScriptedScenario::fromJson(doc);
    CHECK_FALSE(s.strict);
    CHECK(s.entries.at(CallerKey { "planner", 1, "", 1 }) == R"({"steps":[]})");
    CHECK(s.entries.at(CallerKey { "expert", 1, "s1", 2 }) == "text");
    CHECK(ScriptedScenario::fromJson(s.toJson()).entries == s.entries);

    CHECK_THROWS_AS(ScriptedScenario::fromJson(Json::parse(R"({"entries": [{"response": 1}]})")), ConfigError);
    CHECK_THROWS_WITH(ScriptedScenario::load("/no/such/scenario.json"), Catch::Matchers::ContainsSubstring("/no/such/scenario.json"));

    auto dup = ScriptedScenario {};
    dup.add(CallerKey { "a", 0, "", 1 }, "x");
    CHECK_THROWS_AS(dup.add(CallerKey { "a", 0, "", 1 }, "y"), ConfigError);
}

TEST_CASE("request validation")
{
    auto scripted = ScriptedBackend(fortyTwo(false));
    auto r = request(1);
    r.messages.clear();
    CHECK_THROWS_AS(scripted.complete(r), PreconditionViolation);
    r = request(1);
    r.messages[1].content.clear();
    CHECK_THROWS_AS(scripted.complete(r), PreconditionViolation);
    r = request(1);
    r.caller.agentRole.clear();
    CHECK_THROWS_AS(scripted.complete(r), PreconditionViolation);
    r = request(1);
    r.caller.iteration = 0;
    CHECK_THROWS_AS(scripted.complete(r), PreconditionViolation);
}

TEST_CASE("recording backend keeps every request")
{
    auto scripted = ScriptedBackend(fortyTwo(false));
    auto recording = RecordingBackend(scripted);
    (void) recording.complete(request(1));
    auto other = request(1);
    other.caller.agentRole = "planner";
    (void) recording.complete(other);
    CHECK(recording.count() == 2);
    CHECK(recording.requestsFor("planner").size() == 1);
}

TEST_CASE("live payload shape")
{
    auto const live = LiveBackend(options("http://127.0.0.1:1/v1"));
    auto const plain = live.buildPayload(request(1));
    CHECK(plain.at("model") == "test-model");
    CHECK(plain.at("messages").size() == 2);
    CHECK(plain.at("messages")[0].at("role") == "system");
    CHECK(plain.at("max_tokens") == 99);
    CHECK_FALSE(plain.contains("response_format"));

    auto const structured = live.buildPayload(request(1, Schema { "s", { { "a", FieldKind::Any } } }));
    CHECK(structured.at("response_format").at("type") == "json_object");

    CHECK_THROWS_AS(LiveBackend(options("no-scheme")), ConfigError);
    auto nameless = options("http://x");
    nameless.model.clear();
    CHECK_THROWS_AS(LiveBackend(nameless), ConfigError);
}

TEST_CASE("live backend talks to a chat-completions endpoint")
{
    auto seenAuth = std::string {};
    auto seenBody = Json {};
    auto server = MockServer([&](int, const httplib::Request& req, httplib::Response& res) {
        seenAuth = req.get_header_value("Authorization");
        seenBody = Json::parse(req.body);
        res.set_content(chatReply("hello"), "application/json");
    });
    auto live = LiveBackend(options(server.url()));
    CHECK(live.complete(request(1)) == "hello");
    CHECK(seenAuth == "Bearer secret");
    CHECK(seenBody.at("temperature") == 0.25);
}

TEST_CASE("live backend retries 429 and 5xx, then succeeds")
{
    auto server = MockServer([](int hit, const httplib::Request&, httplib::Response& res) {
        if (hit == 1)
            res.status = 429;
        else if (hit == 2)
            res.status = 503;
        else
            res.set_content(chatReply("third time"), "application/json");
    });
    auto live = LiveBackend(options(server.url(), 3));
    CHECK(live.complete(request(1)) == "third time");
    CHECK(server.hits() == 3);
}

TEST_CASE("live backend surfaces a transport error after the retry budget")
{
    auto server = MockServer([](int, const httplib::Request&, httplib::Response& res) { res.status = 500; });
    auto live = LiveBackend(options(server.url(), 2));
    CHECK_THROWS_AS(live.complete(request(1)), TransportError);
    CHECK(server.hits() == 3);
}

TEST_CASE("live backend does not retry client errors")
{
    auto server = MockServer([](int, const httplib::Request&, httplib::Response& res) {
        res.status = 400;
        res.set_content("bad request", "text/plain");
    });
    auto live = LiveBackend(options(server.url(), 3));
    CHECK_THROWS_WITH(live.complete(request(1)), Catch::Matchers::ContainsSubstring("HTTP 400"));
    CHECK(server.hits() == 1);
}

TEST_CASE("live backend rejects malformed bodies")
{
    auto server = MockServer([](int, const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"choices": []})", "application/json");
    });
    auto live = LiveBackend(options(server.url(), 0));
    CHECK_THROWS_AS(live.complete(request(1)), TransportError);
}

TEST_CASE("unreachable endpoint is a transport error")
{
    auto live = LiveBackend(options("http://127.0.0.1:1/v1", 1));
    CHECK_THROWS_AS(live.complete(request(1)), TransportError);
}
