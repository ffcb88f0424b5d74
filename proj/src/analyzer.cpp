// SPDX-License-Identifier: Apache-2.0
#include <pathfinder/agents.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cctype>

namespace pathfinder
{

const Schema& analysisSchema()
{
    static auto const schema = Schema {
        "problem_analysis",
        {
            { "restatement", FieldKind::String },
            { "constraints", FieldKind::Array, false },
            { "requirements", FieldKind::Array, false },
            { "assumptions", FieldKind::Array, false },
        },
    };
    return schema;
}

namespace
{
    bool blank(std::string_view text)
    {
        return std::ranges::all_of(text, [](unsigned char c) { return std::isspace(c); });
    }

    std::vector<std::string> textList(const Json& value, const char* key)
    {
        auto out = std::vector<std::string> {};
        if (auto const it = value.find(key); it != value.end() && it->is_array())
            for (auto const& item: *it)
                out.push_back(scalarText(item));
        return out;
    }

    std::string bulletList(const std::vector<std::string>& items)
    {
        if (items.empty())
            return "(none)";
        auto out = std::string {};
        for (auto const& item: items)
            out += "- " + item + "\n";
        out.pop_back();
        return out;
    }
} // namespace

ProblemAnalysis analyze(const Problem& problem, const std::vector<std::string>& documentTitles, AgentEnvironment env)
{
    auto const system = env.prompts.render("analyzer",
                                           {
                                               { "question", problem.question },
                                               { "documents", bulletList(documentTitles) },
                                               { "schema", analysisSchema().describe() },
                                           });

    auto request = CompletionRequest {
        .messages = { ChatMessage { ChatRole::System, system }, ChatMessage { ChatRole::User, problem.question } },
        .schema = analysisSchema(),
        .temperature = env.temperature,
        .maxTokens = env.maxTokens,
        .caller = CallerKey { std::string(agent::Analyzer), 0, {}, 1 },
    };

    auto outcome = ParseOutcome {};
    try
    {
        outcome = completeStructured(env.backend, request);
    }
    catch (const ParseFailure& e)
    {
        throw AnalysisFailure(fmt::format("analysis failed: {}", e.what()), e.rawText());
    }

    auto const& value = outcome.value;
    auto analysis = ProblemAnalysis {};
    analysis.restatement = stringOr(value, "restatement");
    analysis.requirements = textList(value, "requirements");
    analysis.assumptions = textList(value, "assumptions");

    if (blank(analysis.restatement))
        throw AnalysisFailure("analysis failed: restatement is empty", value.dump());
    if (std::ranges::any_of(analysis.requirements, blank))
        throw AnalysisFailure("analysis failed: empty requirement", value.dump());

    if (auto const it = value.find("constraints"); it != value.end() && it->is_array())
    {
        for (auto const& item: *it)
        {
            auto description = item.is_object() ? stringOr(item, "description") : scalarText(item);
            if (blank(description))
                continue;
            analysis.constraints.push_back(Constraint {
                .id = fmt::format("a{}", analysis.constraints.size() + 1),
                .description = std::move(description),
                .scope = ConstraintScope::global(),
                .origin = ConstraintOrigin::Analysis,
                .planVersionDiscovered = 0,
            });
        }
    }

    return analysis;
}

} // namespace pathfinder
