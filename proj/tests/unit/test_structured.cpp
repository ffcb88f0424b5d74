// SPDX-License-Identifier: Apache-2.0
#include <pathfinder/backend.hpp>

#include <catch_amalgamated.hpp>

using namespace pathfinder;

namespace
{

Schema const feedback { "feedback", { { "status", FieldKind::String } } };
Schema const loose { "loose", { { "a", FieldKind::Integer } } };

CompletionRequest requestFor(std::string role)
{
    return CompletionRequest {
        .messages = { ChatMessage { ChatRole::User, "go" } },
        .schema = feedback,
        .temperature = 0.0,
        .maxTokens = 64,
        .caller = CallerKey { std::move(role), 1, "s1", 1 },
    };
}

} // namespace

TEST_CASE("parse stages on the documented inputs")
{
    auto const direct = parseStructured(R"({"status":"achieved"})", feedback);
    CHECK(direct.stage == ParseStage::Direct);
    CHECK(direct.value.at("status") == "achieved");

    auto const fenced = parseStructured("```json\n{\"status\":\"achieved\"}\n```", feedback);
    CHECK(fenced.stage == ParseStage::StripFences);
    CHECK(fenced.value == direct.value);

    auto const braces = parseStructured(R"(the answer is {"a":1} thanks)", loose);
    CHECK(braces.stage == ParseStage::BalancedBraces);
    CHECK(braces.value == Json { { "a", 1 } });
}

TEST_CASE("valid input always wins at stage 1")
{
    for (auto const* text: { R"({"status":"x"})", R"(  {"status":"y","extra":[1,{"z":"}"}]}  )" })
    {
        auto const once = parseStructured(text, feedback);
        CHECK(once.stage == ParseStage::Direct);
        auto const twice = parseStructured(once.value.dump(), feedback);
        CHECK(twice.stage == ParseStage::Direct);
        CHECK(twice.value == once.value);
    }
}

TEST_CASE("missing required field is a failure, never a default")
{
    try
    {
        (void) parseStructured(R"({"state":"achieved"})", feedback);
        FAIL("expected ParseFailure");
    }
    catch (const ParseFailure& e)
    {
        CHECK(e.rawText() == R"({"state":"achieved"})");
        REQUIRE_FALSE(e.diagnostics().empty());
        CHECK(e.diagnostics().front().find("missing required field 'status'") != std::string::npos);
    }
    CHECK_THROWS_AS(parseStructured(R"({"status": 3})", feedback), ParseFailure);
    CHECK_THROWS_AS(parseStructured("no json at all", feedback), ParseFailure);
}

TEST_CASE("balanced brace extraction respects string literals")
{
    CHECK(firstBalancedBraces(R"(x {"a":"}{"} y)") == std::optional<std::string>(R"({"a":"}{"})"));
    CHECK(firstBalancedBraces(R"({"a":"\"}"} tail)") == std::optional<std::string>(R"({"a":"\"}"})"));
    CHECK_FALSE(firstBalancedBraces("{ unterminated"));
    CHECK_FALSE(firstBalancedBraces("none"));
}

TEST_CASE("fence stripping")
{
    CHECK(stripCodeFences("```\n{\"a\":1}\n```") == "{\"a\":1}");
    CHECK(stripCodeFences("plain") == "plain");
}

TEST_CASE("schema description names every field")
{
    auto const s = Schema { "x", { { "a", FieldKind::String }, { "b", FieldKind::Array, false } } };
    CHECK(s.describe() == R"({"a": string, "b": array?})");
    CHECK(s.check(Json::array()).size() == 1);
    CHECK(s.check(Json { { "a", "v" } }).empty());
}

TEST_CASE("stage 4 re-prompts once under the repair caller key")
{
    auto scenario = ScriptedScenario {};
    scenario.add(CallerKey { "expert", 1, "s1", 1 }, "I cannot produce JSON");
    scenario.add(CallerKey { "expert/repair", 1, "s1", 1 }, R"({"status":"achieved"})");
    auto scripted = ScriptedBackend(scenario);
    auto recording = RecordingBackend(scripted);

    auto const outcome = completeStructured(recording, requestFor("expert"));
    CHECK(outcome.stage == ParseStage::Reprompt);
    REQUIRE(recording.count() == 2);
    auto const repair = recording.requests()[1];
    CHECK(repair.caller.agentRole == "expert/repair");
    CHECK(repair.messages.size() == 3);
    CHECK(repair.messages[1].role == ChatRole::Assistant);
    CHECK(repair.messages[1].content == "I cannot produce JSON");
}

TEST_CASE("all four stages failing carries the raw text")
{
    auto scenario = ScriptedScenario {};
    scenario.add(CallerKey { "expert", 1, "s1", 1 }, "garbage");
    scenario.add(CallerKey { "expert/repair", 1, "s1", 1 }, "still garbage");
    auto scripted = ScriptedBackend(scenario);
    try
    {
        (void) completeStructured(scripted, requestFor("expert"));
        FAIL("expected ParseFailure");
    }
    catch (const ParseFailure& e)
    {
        CHECK(e.rawText() == "garbage");
        CHECK(e.diagnostics().size() >= 4);
    }
}

TEST_CASE("structured completion requires a schema")
{
    auto scripted = ScriptedBackend(ScriptedScenario {});
    auto request = requestFor("expert");
    request.schema.reset();
    CHECK_THROWS_AS(completeStructured(scripted, request), PreconditionViolation);
}
