// SPDX-License-Identifier: Apache-2.0
#include <pathfinder/expert.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <deque>

namespace pathfinder
{

namespace
{
    constexpr std::string_view MalformedAction = "malformed action";
    constexpr std::string_view BudgetExhausted = "iteration budget exhausted";

    std::vector<std::string> textList(const Json& value, const char* key)
    {
        auto out = std::vector<std::string> {};
        if (auto const it = value.find(key); it != value.end() && it->is_array())
            for (auto const& item: *it)
                if (auto text = scalarText(item); !text.empty())
                    out.push_back(std::move(text));
        return out;
    }

    std::vector<Constraint> constraintsFrom(const Json& value, std::uint32_t planVersion, std::string_view stepId)
    {
        auto out = std::vector<Constraint> {};
        auto const it = value.find("constraints");
        if (it == value.end() || !it->is_array())
            return out;
        for (auto const& item: *it)
        {
            auto description = item.is_object() ? stringOr(item, "description") : scalarText(item);
            if (normalizeText(description).empty())
                continue;
            auto const scope = item.is_object() ? stringOr(item, "scope", "global") : std::string("global");
            out.push_back(Constraint {
                .id = fmt::format("v{}.{}.c{}", planVersion, stepId, out.size() + 1),
                .description = std::move(description),
                .scope = scope == "global" ? ConstraintScope::global() : ConstraintScope::stepLocal(std::string(stepId)),
                .origin = ConstraintOrigin::ExpertFeedback,
                .planVersionDiscovered = planVersion,
            });
        }
        return out;
    }

    std::vector<AttemptedAlternative> alternativesFrom(const Json& value)
    {
        auto out = std::vector<AttemptedAlternative> {};
        if (auto const it = value.find("alternatives"); it != value.end() && it->is_array())
            for (auto const& item: *it)
            {
                if (item.is_object())
                    out.push_back({ stringOr(item, "approach"), stringOr(item, "outcome") });
                else
                    out.push_back({ scalarText(item), {} });
            }
        return out;
    }

    struct TranscriptEntry
    {
        std::uint32_t iteration = 0;
        std::string action;
        Observation observation;
    };

    std::string renderTranscript(const std::deque<TranscriptEntry>& transcript)
    {
        if (transcript.empty())
            return "(no observations yet)";
        auto out = std::string {};
        for (auto const& entry: transcript)
            out += fmt::format("[iteration {}] {} -> (origin={}) {}\n",
                               entry.iteration,
                               entry.action,
                               toString(entry.observation.origin),
                               entry.observation.text);
        out.pop_back();
        return out;
    }

    std::string formatPrior(const std::vector<PlanStep>& steps)
    {
        auto out = std::string {};
        for (auto const& step: steps)
        {
            if (!step.result)
                continue;
            out += fmt::format("- {} ({}): {}\n", step.id, step.task, step.result->answer);
            for (auto const& [name, value]: step.result->artifacts)
                out += fmt::format("    {} = {}\n", name, value);
        }
        if (out.empty())
            return "(none)";
        out.pop_back();
        return out;
    }

    std::string formatTools(const ToolRegistry& tools, const ExpertRole* role)
    {
        auto out = std::string {};
        for (auto const& spec: tools.specs())
        {
            if (role && std::ranges::find(role->tools, spec.name) == role->tools.end())
                continue;
            out += fmt::format("- {}: {} arguments {}\n", spec.name, spec.description, spec.arguments.describe());
        }
        if (out.empty())
            return "(none)";
        out.pop_back();
        return out;
    }

    std::string describeAction(const ExpertAction& action)
    {
        return std::visit(
            [](auto const& a) -> std::string {
                using T = std::decay_t<decltype(a)>;
                if constexpr (std::is_same_v<T, UseTool>)
                    return fmt::format("use_tool {} {}", a.tool, a.arguments.dump());
                else if constexpr (std::is_same_v<T, RequestAssistance>)
                    return fmt::format("request_assistance \"{}\"", a.question);
                else if constexpr (std::is_same_v<T, DeclareAchieved>)
                    return fmt::format("declare_achieved \"{}\"", a.result.answer);
                else
                    return fmt::format("declare_infeasible \"{}\"", a.failureReason);
            },
            action.kind);
    }
} // namespace

std::string_view actionName(const ExpertAction& action) noexcept
{
    constexpr std::string_view names[] = { "use_tool", "request_assistance", "declare_achieved", "declare_infeasible" };
    return names[action.kind.index()];
}

const Schema& actionSchema()
{
    static auto const schema = Schema {
        "expert_action",
        {
            { "action", FieldKind::String },
            { "thought", FieldKind::String, false },
        },
    };
    return schema;
}

ExpertAction actionFromJson(const Json& value, std::uint32_t planVersion, std::string_view stepId)
{
    auto const name = stringOr(value, "action");
    auto action = ExpertAction {};
    action.thought = stringOr(value, "thought");

    if (name == "use_tool")
    {
        auto tool = stringOr(value, "tool");
        if (tool.empty())
            throw Error("use_tool without a tool name");
        auto arguments = value.contains("arguments") ? value.at("arguments") : Json::object();
        if (!arguments.is_object())
            throw Error("use_tool arguments must be an object");
        action.kind = UseTool { std::move(tool), std::move(arguments) };
    }
    else if (name == "request_assistance")
    {
        auto question = stringOr(value, "question");
        if (normalizeText(question).empty())
            throw Error("request_assistance without a question");
        action.kind = RequestAssistance { std::move(question) };
    }
    else if (name == "declare_achieved")
    {
        auto result = StepResult {};
        result.answer = value.contains("answer") ? scalarText(value.at("answer")) : std::string {};
        if (normalizeText(result.answer).empty())
            throw Error("declare_achieved without an answer");
        if (auto const it = value.find("artifacts"); it != value.end() && it->is_object())
            for (auto const& [k, v]: it->items())
                result.artifacts[k] = scalarText(v);
        result.insights = textList(value, "insights");
        action.kind = DeclareAchieved { std::move(result), constraintsFrom(value, planVersion, stepId) };
    }
    else if (name == "declare_infeasible")
    {
        auto infeasible = DeclareInfeasible {};
        infeasible.failureReason = stringOr(value, "failure_reason");
        if (normalizeText(infeasible.failureReason).empty())
            throw Error("declare_infeasible without a failure_reason");
        infeasible.constraints = constraintsFrom(value, planVersion, stepId);
        infeasible.alternatives = alternativesFrom(value);
        infeasible.insights = textList(value, "insights");
        action.kind = std::move(infeasible);
    }
    else
        throw Error(fmt::format("unknown action '{}'", name));

    return action;
}

// {{{ assistance

void to_json(Json& j, const AssistanceRequest& v)
{
    j = Json {
        { "request_id", v.id },
        { "run_id", v.runId },
        { "plan_version", v.planVersion },
        { "step_id", v.stepId },
        { "iteration", v.iteration },
        { "question", v.question },
        { "excerpt", v.excerpt },
    };
}

std::string_view toString(ObservationOrigin origin) noexcept
{
    switch (origin)
    {
        case ObservationOrigin::Tool: return "tool";
        case ObservationOrigin::Human: return "human";
        case ObservationOrigin::System: return "system";
    }
    return "system";
}

Observation handleAssistance(const AssistanceRequest& request, ExpertServices& services)
{
    auto requested = Json(request);
    requested["hitl_enabled"] = services.config.hitlEnabled;

    auto received = Json {
        { "plan_version", request.planVersion },
        { "step_id", request.stepId },
        { "iteration", request.iteration },
        { "request_id", nullptr },
        { "timed_out", false },
        { "fallback", true },
    };
    auto const fallback = [&](std::optional<std::string> warning) {
        received["text"] = NoHumanFallback;
        received["author"] = nullptr;
        received["origin"] = toString(ObservationOrigin::System);
        if (warning)
            received["warning"] = *warning;
        services.events.append(EventKind::AssistanceReceived, received);
        return Observation { std::string(NoHumanFallback), ObservationOrigin::System };
    };

    if (!services.config.hitlEnabled || !services.assistance)
    {
        requested["request_id"] = nullptr;
        services.events.append(EventKind::AssistanceRequested, requested);
        return fallback(std::nullopt);
    }

    auto id = std::string {};
    try
    {
        id = services.assistance->open(request);
    }
    catch (const GatewayUnavailable& e)
    {
        requested["request_id"] = nullptr;
        services.events.append(EventKind::AssistanceRequested, requested);
        return fallback(fmt::format("gateway unavailable: {}", e.what()));
    }

    requested["request_id"] = id;
    received["request_id"] = id;
    services.events.append(EventKind::AssistanceRequested, requested);

    auto reply = std::optional<HumanReply> {};
    try
    {
        reply = services.assistance->await(id, services.config.humanResponseTimeout);
    }
    catch (const GatewayUnavailable& e)
    {
        return fallback(fmt::format("gateway unavailable: {}", e.what()));
    }

    if (!reply)
    {
        received["timed_out"] = true;
        return fallback(std::nullopt);
    }

    received["text"] = reply->text;
    received["author"] = reply->author;
    received["origin"] = toString(ObservationOrigin::Human);
    received["fallback"] = false;
    services.events.append(EventKind::AssistanceReceived, received);
    return Observation { reply->text, ObservationOrigin::Human };
}

// }}}

FeedbackReport executeStep(const PlanStep& step,
                           std::uint32_t planVersion,
                           const ExpertContext& context,
                           std::uint32_t budget,
                           ExpertServices& services)
{
    if (budget < 1)
        throw PreconditionViolation("expert budget must be at least 1");
    if (step.status != StepStatus::Pending)
        throw PreconditionViolation(fmt::format("step {} is not pending", step.id));

    auto const* role = services.roster.find(step.expertRole);
    auto const system = services.prompts.render(
        "expert",
        {
            { "role", step.expertRole },
            { "role_description", role ? role->description : std::string("general problem solver") },
            { "restatement", context.analysis.restatement },
            { "task", step.task },
            { "goal", step.goal },
            { "prior_results", formatPrior(context.priorResults) },
            { "constraints", formatConstraints(context.knowledge) },
            { "tools", formatTools(services.tools, role) },
            { "schema", actionSchema().describe() },
        });

    auto report = FeedbackReport {};
    report.stepId = step.id;
    report.planVersion = planVersion;

    auto transcript = std::deque<TranscriptEntry> {};
    auto const window = std::max<std::uint32_t>(1, services.config.transcriptWindow);
    auto lastObstacle = std::string {};

    auto const record = [&](std::uint32_t iteration, std::string_view kind, const std::string& thought,
                            std::string actionText, Observation observation) {
        services.events.append(EventKind::ExpertIteration,
                               Json {
                                   { "plan_version", planVersion },
                                   { "step_id", step.id },
                                   { "iteration", iteration },
                                   { "action", kind },
                                   { "thought", thought },
                                   { "observation", observation.text },
                                   { "origin", toString(observation.origin) },
                               });
        transcript.push_back({ iteration, std::move(actionText), std::move(observation) });
        while (transcript.size() > window)
            transcript.pop_front();
    };

    for (auto iteration = 1u; iteration <= budget; ++iteration)
    {
        report.iterationsUsed = iteration;

        auto request = CompletionRequest {
            .messages = { ChatMessage { ChatRole::System, system },
                          ChatMessage { ChatRole::User,
                                        fmt::format("Iteration {} of {}.\nTranscript:\n{}\nReply with your next action.",
                                                    iteration,
                                                    budget,
                                                    renderTranscript(transcript)) } },
            .schema = actionSchema(),
            .temperature = services.config.temperature,
            .maxTokens = services.config.maxTokens,
            .caller = CallerKey { std::string(agent::Expert), planVersion, step.id, iteration },
        };

        auto action = std::optional<ExpertAction> {};
        try
        {
            action = actionFromJson(completeStructured(services.backend, request).value, planVersion, step.id);
        }
        catch (const ParseFailure&)
        {
        }
        catch (const ScenarioMiss&)
        {
            throw;
        }
        catch (const TransportError&)
        {
            throw;
        }
        catch (const Error&)
        {
        }

        if (!action)
        {
            record(iteration, "malformed", {}, "(unparseable reply)", { std::string(MalformedAction), ObservationOrigin::System });
            continue;
        }

        if (!action->thought.empty())
            lastObstacle = action->thought;
        auto const kind = actionName(*action);

        if (auto* use = std::get_if<UseTool>(&action->kind))
        {
            auto result = ToolResult {};
            if (role && std::ranges::find(role->tools, use->tool) == role->tools.end() && services.tools.contains(use->tool))
                result = ToolResult::failure(fmt::format("tool {} is not available to role {}", use->tool, role->id));
            else
                result = services.tools.invoke(use->tool, use->arguments);
            ++report.toolCalls;
            services.events.append(EventKind::ToolInvoked,
                                   Json {
                                       { "plan_version", planVersion },
                                       { "step_id", step.id },
                                       { "iteration", iteration },
                                       { "tool", use->tool },
                                       { "arguments", use->arguments },
                                       { "ok", result.ok },
                                       { "result", result.text },
                                   });
            auto text = result.ok ? result.text : "error: " + result.text;
            record(iteration, kind, action->thought, describeAction(*action), { std::move(text), ObservationOrigin::Tool });
        }
        else if (auto* ask = std::get_if<RequestAssistance>(&action->kind))
        {
            auto excerpt = std::vector<std::string> {};
            auto const from = transcript.size() > AssistanceExcerptSize ? transcript.size() - AssistanceExcerptSize : 0;
            for (auto i = from; i < transcript.size(); ++i)
                excerpt.push_back(transcript[i].observation.text);
            auto observation = handleAssistance(
                AssistanceRequest {
                    .id = {},
                    .runId = context.runId,
                    .planVersion = planVersion,
                    .stepId = step.id,
                    .iteration = iteration,
                    .question = ask->question,
                    .excerpt = std::move(excerpt),
                },
                services);
            record(iteration, kind, action->thought, describeAction(*action), std::move(observation));
        }
        else if (auto* done = std::get_if<DeclareAchieved>(&action->kind))
        {
            record(iteration, kind, action->thought, describeAction(*action), { {}, ObservationOrigin::System });
            report.status = FeedbackStatus::Achieved;
            report.result = done->result;
            report.discoveredConstraints = done->constraints;
            report.insights = done->result.insights;
            return report;
        }
        else if (auto* stuck = std::get_if<DeclareInfeasible>(&action->kind))
        {
            record(iteration, kind, action->thought, describeAction(*action), { {}, ObservationOrigin::System });
            report.status = FeedbackStatus::Infeasible;
            report.failureReason = stuck->failureReason;
            report.discoveredConstraints = stuck->constraints;
            report.attemptedAlternatives = stuck->alternatives;
            report.insights = stuck->insights;
            return report;
        }
    }

    report.status = FeedbackStatus::BudgetExhausted;
    report.failureReason = lastObstacle.empty() ? std::string(BudgetExhausted)
                                                : fmt::format("{}; last obstacle: {}", BudgetExhausted, lastObstacle);
    return report;
}

} // namespace pathfinder
