// SPDX-License-Identifier: Apache-2.0
#include <pathfinder/agents.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <set>

namespace pathfinder
{

// {{{ roster

const ExpertRole* ExpertRoster::find(std::string_view id) const
{
    auto const it = std::ranges::find(roles, id, &ExpertRole::id);
    return it == roles.end() ? nullptr : &*it;
}

void ExpertRoster::validate() const
{
    if (roles.empty())
        throw ConfigError("expert roster must contain at least one role");
    auto ids = std::set<std::string> {};
    for (auto const& role: roles)
    {
        if (role.id.empty())
            throw ConfigError("expert role id must be non-empty");
        if (!ids.insert(role.id).second)
            throw ConfigError("duplicate expert role id " + role.id);
    }
}

ExpertRoster ExpertRoster::defaults()
{
    return ExpertRoster { {
        { "researcher", "locates facts and figures in the document corpus", { "corpus_search" } },
        { "analyst", "computes derived quantities from located figures", { "calculator", "corpus_search" } },
    } };
}

// }}}

const Schema& planSchema()
{
    static auto const schema = Schema {
        "plan",
        {
            { "steps", FieldKind::Array },
            { "rationale", FieldKind::String, false },
        },
    };
    return schema;
}

std::string formatConstraints(const KnowledgeState& knowledge)
{
    if (knowledge.constraints.empty())
        return "(none)";
    auto out = std::string {};
    for (auto const& c: knowledge.constraints)
    {
        auto const scope = c.scope.isGlobal() ? std::string("global") : "step " + c.scope.stepId;
        out += fmt::format("{}{} (scope: {}; origin: {})\n", ConstraintLinePrefix, c.description, scope, toString(c.origin));
    }
    out.pop_back();
    return out;
}

std::string formatDeadEnds(const KnowledgeState& knowledge)
{
    if (knowledge.deadEnds.empty())
        return "(none)";
    auto out = std::string {};
    for (auto const& d: knowledge.deadEnds)
        out += fmt::format("{}plan v{} step {}: {}\n", DeadEndLinePrefix, d.planVersion, d.stepId, d.failureReason);
    out.pop_back();
    return out;
}

namespace
{
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

    std::string formatRoster(const ExpertRoster& roster)
    {
        auto out = std::string {};
        for (auto const& role: roster.roles)
            out += fmt::format("- {}: {} (tools: {})\n", role.id, role.description, fmt::join(role.tools, ", "));
        if (!out.empty())
            out.pop_back();
        return out;
    }

    std::string formatSteps(const Plan& plan)
    {
        auto out = std::string {};
        for (auto const& step: plan.steps)
        {
            out += fmt::format("- {} [{}] role={} depends_on=[{}]\n  task: {}\n  goal: {}\n",
                               step.id,
                               toString(step.status),
                               step.expertRole,
                               fmt::join(step.dependsOn, ", "),
                               step.task,
                               step.goal);
        }
        if (!out.empty())
            out.pop_back();
        return out.empty() ? "(none)" : out;
    }

    std::string formatAchieved(const Plan& plan)
    {
        auto out = std::string {};
        for (auto const& step: plan.steps)
            if (step.status == StepStatus::Achieved && step.result)
                out += fmt::format("- {}: {} => {}\n", step.id, step.task, step.result->answer);
        if (!out.empty())
            out.pop_back();
        return out.empty() ? "(none)" : out;
    }

    // Steps as proposed by the model: status and results are always reset,
    // only the structural fields are taken.
    std::vector<PlanStep> stepsFrom(const Json& value)
    {
        auto steps = std::vector<PlanStep> {};
        for (auto const& item: value.at("steps"))
        {
            if (!item.is_object())
                throw Error("plan step is not an object");
            auto step = PlanStep {};
            step.id = stringOr(item, "id");
            step.task = stringOr(item, "task");
            step.goal = stringOr(item, "goal");
            step.expertRole = stringOr(item, "expert_role");
            if (auto const deps = item.find("depends_on"); deps != item.end() && deps->is_array())
                for (auto const& dep: *deps)
                    step.dependsOn.push_back(scalarText(dep));
            steps.push_back(std::move(step));
        }
        return steps;
    }

    std::vector<std::string> rosterViolations(const Plan& plan, const ExpertRoster& roster)
    {
        auto out = std::vector<std::string> {};
        for (auto const& step: plan.steps)
            if (!step.expertRole.empty() && !roster.find(step.expertRole))
                out.push_back(fmt::format("step {}: unknown expert role '{}'", step.id, step.expertRole));
        return out;
    }

    // Up to two attempts: the original request and one corrective re-prompt
    // carrying the violations. `assemble` turns model output into a plan.
    template <typename Assemble>
    Plan planWithCorrection(CompletionRequest request,
                            const ExpertRoster& roster,
                            AgentEnvironment env,
                            Assemble assemble)
    {
        auto violations = std::vector<std::string> {};
        for (auto attempt = 1u; attempt <= 2u; ++attempt)
        {
            request.caller.iteration = attempt;
            auto raw = std::string {};
            try
            {
                raw = env.backend.complete(request);
                auto const outcome = parseStructured(raw, planSchema(), env.backend, request);
                auto plan = assemble(outcome.value);
                violations = validatePlan(plan).violations;
                for (auto& v: rosterViolations(plan, roster))
                    violations.push_back(std::move(v));
                if (plan.steps.empty())
                    violations.emplace_back("plan has no steps");
                if (violations.empty())
                    return plan;
            }
            catch (const ParseFailure& e)
            {
                violations = e.diagnostics();
            }
            catch (const Json::exception& e)
            {
                violations = { e.what() };
            }
            catch (const Error& e)
            {
                if (dynamic_cast<const ScenarioMiss*>(&e) && attempt > 1)
                    throw PlanningFailure(fmt::format("planning failed: {}", e.what()), violations);
                if (dynamic_cast<const ScenarioMiss*>(&e) || dynamic_cast<const TransportError*>(&e))
                    throw;
                violations = { e.what() };
            }

            request.messages.push_back(ChatMessage { ChatRole::Assistant, raw.empty() ? "(no reply)" : raw });
            request.messages.push_back(ChatMessage {
                ChatRole::User,
                fmt::format("The plan was rejected:\n{}\nReply with a corrected plan of the shape {}.",
                            bulletList(violations),
                            planSchema().describe()),
            });
        }
        throw PlanningFailure(fmt::format("planning failed after corrective re-prompt: {}", fmt::join(violations, "; ")),
                              violations);
    }
} // namespace

Plan planInitial(const ProblemAnalysis& analysis,
                 const ExpertRoster& roster,
                 const KnowledgeState& knowledge,
                 AgentEnvironment env)
{
    roster.validate();
    auto const system = env.prompts.render("planner_initial",
                                           {
                                               { "restatement", analysis.restatement },
                                               { "requirements", bulletList(analysis.requirements) },
                                               { "assumptions", bulletList(analysis.assumptions) },
                                               { "constraints", formatConstraints(knowledge) },
                                               { "roster", formatRoster(roster) },
                                               { "schema", planSchema().describe() },
                                           });

    auto request = CompletionRequest {
        .messages = { ChatMessage { ChatRole::System, system },
                      ChatMessage { ChatRole::User, "Produce the initial plan." } },
        .schema = planSchema(),
        .temperature = env.temperature,
        .maxTokens = env.maxTokens,
        .caller = CallerKey { std::string(agent::Planner), 1, {}, 1 },
    };

    return planWithCorrection(std::move(request), roster, env, [](const Json& value) {
        auto plan = Plan {};
        plan.version = 1;
        plan.rationale = stringOr(value, "rationale");
        plan.steps = stepsFrom(value);
        return plan;
    });
}

Plan replan(const Plan& current,
            const ProblemAnalysis& analysis,
            const ExpertRoster& roster,
            const KnowledgeState& knowledge,
            const FeedbackReport& trigger,
            AgentEnvironment env)
{
    if (trigger.status == FeedbackStatus::Achieved)
        throw PreconditionViolation("replan requires an infeasible or budget-exhausted trigger");
    roster.validate();

    auto const nextVersion = current.version + 1;
    auto const triggerText = fmt::format("step {} ({}): {}",
                                         trigger.stepId,
                                         toString(trigger.status),
                                         trigger.failureReason.value_or("(no reason given)"));

    auto const system = env.prompts.render("planner_replan",
                                           {
                                               { "restatement", analysis.restatement },
                                               { "requirements", bulletList(analysis.requirements) },
                                               { "constraints", formatConstraints(knowledge) },
                                               { "dead_ends", formatDeadEnds(knowledge) },
                                               { "insights", bulletList(knowledge.insights) },
                                               { "trigger", triggerText },
                                               { "version", std::to_string(current.version) },
                                               { "current_plan", formatSteps(current) },
                                               { "achieved", formatAchieved(current) },
                                               { "roster", formatRoster(roster) },
                                               { "schema", planSchema().describe() },
                                           });

    auto request = CompletionRequest {
        .messages = { ChatMessage { ChatRole::System, system },
                      ChatMessage { ChatRole::User, "Produce the revised plan." } },
        .schema = planSchema(),
        .temperature = env.temperature,
        .maxTokens = env.maxTokens,
        .caller = CallerKey { std::string(agent::Planner), nextVersion, {}, 1 },
    };

    return planWithCorrection(std::move(request), roster, env, [&](const Json& value) {
        auto plan = Plan {};
        plan.version = nextVersion;
        plan.supersedes = current.version;
        plan.rationale = stringOr(value, "rationale");

        auto carried = std::set<std::string> {};
        for (auto const& step: current.steps)
            if (step.status == StepStatus::Achieved)
            {
                plan.steps.push_back(step);
                carried.insert(step.id);
            }
        for (auto& step: stepsFrom(value))
            if (!carried.contains(step.id))
                plan.steps.push_back(std::move(step));
        if (plan.steps.size() == carried.size())
            throw Error("revised plan adds no new steps");
        return plan;
    });
}

std::vector<PlanStep> selectReadySteps(const Plan& plan)
{
    auto ready = std::vector<PlanStep> {};
    for (auto const& step: plan.steps)
    {
        if (step.status != StepStatus::Pending)
            continue;
        auto const satisfied = std::ranges::all_of(step.dependsOn, [&](auto const& dep) {
            auto const* d = plan.findStep(dep);
            return d && d->status == StepStatus::Achieved;
        });
        if (satisfied)
            ready.push_back(step);
    }
    std::ranges::sort(ready, {}, &PlanStep::id);
    return ready;
}

} // namespace pathfinder
