// SPDX-License-Identifier: Apache-2.0
#include <pathfinder/serialize.hpp>

#include <fmt/format.h>

namespace pathfinder
{

namespace
{
    template <typename T>
    void optionalTo(Json& j, const char* key, const std::optional<T>& value)
    {
        if (value)
            j[key] = *value;
        else
            j[key] = nullptr;
    }

    template <typename T>
    void optionalFrom(const Json& j, const char* key, std::optional<T>& value)
    {
        if (auto const it = j.find(key); it != j.end() && !it->is_null())
            value = it->get<T>();
        else
            value.reset();
    }

    template <typename T>
    void listFrom(const Json& j, const char* key, std::vector<T>& out)
    {
        out.clear();
        if (auto const it = j.find(key); it != j.end() && !it->is_null())
            out = it->get<std::vector<T>>();
    }

    KeyValues keyValuesFrom(const Json& j, const char* key)
    {
        auto out = KeyValues {};
        if (auto const it = j.find(key); it != j.end() && it->is_object())
            for (auto const& [k, v]: it->items())
                out[k] = scalarText(v);
        return out;
    }

    template <typename E>
    E enumFrom(const Json& j, const char* key, std::optional<E> (*parse)(std::string_view) noexcept)
    {
        auto const text = j.at(key).get<std::string>();
        auto const value = parse(text);
        if (!value)
            throw Error(fmt::format("unknown {} '{}'", key, text));
        return *value;
    }
} // namespace

std::string stringOr(const Json& j, const char* key, std::string fallback)
{
    if (!j.is_object())
        return fallback;
    auto const it = j.find(key);
    if (it == j.end() || it->is_null())
        return fallback;
    return scalarText(*it);
}

std::string scalarText(const Json& value)
{
    if (value.is_string())
        return value.get<std::string>();
    if (value.is_null())
        return {};
    return value.dump();
}

void to_json(Json& j, const Problem& v)
{
    j = Json { { "id", v.id }, { "question", v.question }, { "corpus_refs", v.corpusRefs } };
    j["config_overrides"] = v.configOverrides;
}

void from_json(const Json& j, Problem& v)
{
    v.id = j.at("id").get<std::string>();
    v.question = j.at("question").get<std::string>();
    listFrom(j, "corpus_refs", v.corpusRefs);
    v.configOverrides = keyValuesFrom(j, "config_overrides");
}

void to_json(Json& j, const ConstraintScope& v)
{
    if (v.isGlobal())
        j = Json { { "type", "global" } };
    else
        j = Json { { "type", "step_local" }, { "step_id", v.stepId } };
}

void from_json(const Json& j, ConstraintScope& v)
{
    if (j.is_string() && j.get<std::string>() == "global")
    {
        v.stepId.clear();
        return;
    }
    auto const type = j.at("type").get<std::string>();
    if (type == "global")
        v.stepId.clear();
    else if (type == "step_local")
        v.stepId = j.at("step_id").get<std::string>();
    else
        throw Error("unknown constraint scope '" + type + "'");
}

void to_json(Json& j, const Constraint& v)
{
    j = Json {
        { "id", v.id },
        { "description", v.description },
        { "scope", v.scope },
        { "origin", toString(v.origin) },
        { "plan_version_discovered", v.planVersionDiscovered },
    };
}

void from_json(const Json& j, Constraint& v)
{
    v.id = stringOr(j, "id");
    v.description = j.at("description").get<std::string>();
    v.scope = j.contains("scope") ? j.at("scope").get<ConstraintScope>() : ConstraintScope::global();
    v.origin = j.contains("origin") ? enumFrom<ConstraintOrigin>(j, "origin", parseConstraintOrigin)
                                    : ConstraintOrigin::Analysis;
    v.planVersionDiscovered = j.value("plan_version_discovered", 0u);
}

void to_json(Json& j, const ProblemAnalysis& v)
{
    j = Json {
        { "constraints", v.constraints },
        { "requirements", v.requirements },
        { "assumptions", v.assumptions },
        { "restatement", v.restatement },
    };
}

void from_json(const Json& j, ProblemAnalysis& v)
{
    listFrom(j, "constraints", v.constraints);
    listFrom(j, "requirements", v.requirements);
    listFrom(j, "assumptions", v.assumptions);
    v.restatement = j.at("restatement").get<std::string>();
}

void to_json(Json& j, const StepResult& v)
{
    j = Json { { "answer", v.answer }, { "insights", v.insights } };
    j["artifacts"] = v.artifacts;
}

void from_json(const Json& j, StepResult& v)
{
    v.answer = scalarText(j.at("answer"));
    v.artifacts = keyValuesFrom(j, "artifacts");
    listFrom(j, "insights", v.insights);
}

void to_json(Json& j, const PlanStep& v)
{
    j = Json {
        { "id", v.id },
        { "task", v.task },
        { "goal", v.goal },
        { "expert_role", v.expertRole },
        { "depends_on", v.dependsOn },
        { "status", toString(v.status) },
    };
    optionalTo(j, "result", v.result);
}

void from_json(const Json& j, PlanStep& v)
{
    v.id = j.at("id").get<std::string>();
    v.task = j.at("task").get<std::string>();
    v.goal = j.at("goal").get<std::string>();
    v.expertRole = j.at("expert_role").get<std::string>();
    listFrom(j, "depends_on", v.dependsOn);
    v.status = j.contains("status") ? enumFrom<StepStatus>(j, "status", parseStepStatus) : StepStatus::Pending;
    optionalFrom(j, "result", v.result);
}

void to_json(Json& j, const Plan& v)
{
    j = Json { { "version", v.version }, { "steps", v.steps }, { "rationale", v.rationale } };
    optionalTo(j, "supersedes", v.supersedes);
}

void from_json(const Json& j, Plan& v)
{
    v.version = j.value("version", 1u);
    v.steps = j.at("steps").get<std::vector<PlanStep>>();
    v.rationale = stringOr(j, "rationale");
    optionalFrom(j, "supersedes", v.supersedes);
}

void to_json(Json& j, const AttemptedAlternative& v)
{
    j = Json { { "approach", v.approach }, { "outcome", v.outcome } };
}

void from_json(const Json& j, AttemptedAlternative& v)
{
    v.approach = stringOr(j, "approach");
    v.outcome = stringOr(j, "outcome");
}

void to_json(Json& j, const FeedbackReport& v)
{
    j = Json {
        { "step_id", v.stepId },
        { "plan_version", v.planVersion },
        { "status", toString(v.status) },
        { "discovered_constraints", v.discoveredConstraints },
        { "attempted_alternatives", v.attemptedAlternatives },
        { "insights", v.insights },
        { "iterations_used", v.iterationsUsed },
        { "tool_calls", v.toolCalls },
    };
    optionalTo(j, "result", v.result);
    optionalTo(j, "failure_reason", v.failureReason);
}

void from_json(const Json& j, FeedbackReport& v)
{
    v.stepId = j.at("step_id").get<std::string>();
    v.planVersion = j.at("plan_version").get<std::uint32_t>();
    v.status = enumFrom<FeedbackStatus>(j, "status", parseFeedbackStatus);
    optionalFrom(j, "result", v.result);
    optionalFrom(j, "failure_reason", v.failureReason);
    listFrom(j, "discovered_constraints", v.discoveredConstraints);
    listFrom(j, "attempted_alternatives", v.attemptedAlternatives);
    listFrom(j, "insights", v.insights);
    v.iterationsUsed = j.at("iterations_used").get<std::uint32_t>();
    v.toolCalls = j.value("tool_calls", 0u);
}

void to_json(Json& j, const DeadEnd& v)
{
    j = Json { { "plan_version", v.planVersion }, { "step_id", v.stepId }, { "failure_reason", v.failureReason } };
}

void from_json(const Json& j, DeadEnd& v)
{
    v.planVersion = j.at("plan_version").get<std::uint32_t>();
    v.stepId = j.at("step_id").get<std::string>();
    v.failureReason = j.at("failure_reason").get<std::string>();
}

void to_json(Json& j, const KnowledgeState& v)
{
    j = Json {
        { "constraints", v.constraints },
        { "dead_ends", v.deadEnds },
        { "insights", v.insights },
        { "feedback_history", v.feedbackHistory },
    };
}

void from_json(const Json& j, KnowledgeState& v)
{
    listFrom(j, "constraints", v.constraints);
    listFrom(j, "dead_ends", v.deadEnds);
    listFrom(j, "insights", v.insights);
    listFrom(j, "feedback_history", v.feedbackHistory);
}

void to_json(Json& j, const RunConfig& v)
{
    j = Json {
        { "max_replans", v.maxReplans },
        { "max_expert_iterations", v.maxExpertIterations },
        { "max_total_iterations", v.maxTotalIterations },
        { "human_response_timeout_ms", v.humanResponseTimeout.count() },
        { "hitl_enabled", v.hitlEnabled },
        { "backend",
          {
              { "kind", v.backend.kind == BackendKind::Live ? "live" : "scripted" },
              { "scenario", v.backend.scenarioPath },
              { "base_url", v.backend.baseUrl },
              { "model", v.backend.model },
              { "api_key_env", v.backend.apiKeyEnv },
              { "retries", v.backend.retries },
              { "max_in_flight", v.backend.maxInFlight },
          } },
        { "transcript_window", v.transcriptWindow },
        { "parallel_steps", v.parallelSteps },
        { "temperature", v.temperature },
        { "max_tokens", v.maxTokens },
    };
}

void from_json(const Json& j, RunConfig& v)
{
    auto const defaults = RunConfig {};
    v.maxReplans = j.at("max_replans").get<std::uint32_t>();
    v.maxExpertIterations = j.at("max_expert_iterations").get<std::uint32_t>();
    v.maxTotalIterations = j.at("max_total_iterations").get<std::uint32_t>();
    v.humanResponseTimeout = std::chrono::milliseconds(j.at("human_response_timeout_ms").get<std::int64_t>());
    v.hitlEnabled = j.at("hitl_enabled").get<bool>();
    v.backend = defaults.backend;
    if (auto const it = j.find("backend"); it != j.end() && it->is_object())
    {
        auto const& b = *it;
        v.backend.kind = b.value("kind", std::string("scripted")) == "live" ? BackendKind::Live : BackendKind::Scripted;
        v.backend.scenarioPath = b.value("scenario", defaults.backend.scenarioPath);
        v.backend.baseUrl = b.value("base_url", defaults.backend.baseUrl);
        v.backend.model = b.value("model", defaults.backend.model);
        v.backend.apiKeyEnv = b.value("api_key_env", defaults.backend.apiKeyEnv);
        v.backend.retries = b.value("retries", defaults.backend.retries);
        v.backend.maxInFlight = b.value("max_in_flight", defaults.backend.maxInFlight);
    }
    v.transcriptWindow = j.value("transcript_window", defaults.transcriptWindow);
    v.parallelSteps = j.value("parallel_steps", defaults.parallelSteps);
    v.temperature = j.value("temperature", defaults.temperature);
    v.maxTokens = j.value("max_tokens", defaults.maxTokens);
}

} // namespace pathfinder
