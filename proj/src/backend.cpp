// SPDX-License-Identifier: Apache-2.0
#include <pathfinder/backend.hpp>

#include <httplib.h>

#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <thread>

namespace pathfinder
{

std::string_view toString(ChatRole role) noexcept
{
    switch (role)
    {
        case ChatRole::System: return "system";
        case ChatRole::User: return "user";
        case ChatRole::Assistant: return "assistant";
        case ChatRole::Tool: return "tool";
    }
    return "user";
}

std::string CallerKey::toString() const
{
    return fmt::format("({},{},{},{})", agentRole, planVersion, stepId, iteration);
}

void validateRequest(const CompletionRequest& request)
{
    if (request.messages.empty())
        throw PreconditionViolation("completion request has no messages");
    for (auto const& message: request.messages)
        if ((message.role == ChatRole::System || message.role == ChatRole::User) && message.content.empty())
            throw PreconditionViolation("system/user message content must be non-empty");
    if (request.caller.agentRole.empty() || request.caller.iteration < 1)
        throw PreconditionViolation("completion request caller key incomplete: " + request.caller.toString());
}

// {{{ ScriptedScenario

void ScriptedScenario::add(CallerKey key, std::string response)
{
    if (!entries.emplace(key, std::move(response)).second)
        throw ConfigError("duplicate scenario key " + key.toString());
}

ScriptedScenario ScriptedScenario::fromJson(const Json& document)
{
    auto scenario = ScriptedScenario {};
    try
    {
        scenario.strict = document.value("strict", true);
        for (auto const& entry: document.at("entries"))
        {
            auto key = CallerKey {
                .agentRole = entry.at("role").get<std::string>(),
                .planVersion = entry.value("plan_version", 0u),
                .stepId = entry.value("step_id", std::string {}),
                .iteration = entry.value("iteration", 1u),
            };
            auto const& response = entry.at("response");
            scenario.add(std::move(key), response.is_string() ? response.get<std::string>() : response.dump());
        }
    }
    catch (const Json::exception& e)
    {
        throw ConfigError(fmt::format("malformed scenario: {}", e.what()));
    }
    return scenario;
}

ScriptedScenario ScriptedScenario::load(const std::filesystem::path& path)
{
    auto in = std::ifstream(path);
    if (!in)
        throw ConfigError(fmt::format("cannot open scenario file {}", path.string()));
    auto document = Json::parse(in, nullptr, false);
    if (document.is_discarded())
        throw ConfigError(fmt::format("scenario file {} is not valid JSON", path.string()));
    return fromJson(document);
}

Json ScriptedScenario::toJson() const
{
    auto list = Json::array();
    for (auto const& [key, response]: entries)
        list.push_back(Json {
            { "role", key.agentRole },
            { "plan_version", key.planVersion },
            { "step_id", key.stepId },
            { "iteration", key.iteration },
            { "response", response },
        });
    return Json { { "strict", strict }, { "entries", std::move(list) } };
}

// }}}

ScriptedBackend::ScriptedBackend(ScriptedScenario scenario): _scenario(std::move(scenario))
{
}

std::string ScriptedBackend::complete(const CompletionRequest& request)
{
    validateRequest(request);
    // The scenario is immutable after construction, so lookups need no lock.
    if (auto const it = _scenario.entries.find(request.caller); it != _scenario.entries.end())
        return it->second;
    if (_scenario.strict)
        throw ScenarioMiss(request.caller.toString());
    return std::string(NoScriptFallback);
}

// {{{ RecordingBackend

std::string RecordingBackend::complete(const CompletionRequest& request)
{
    {
        auto const lock = std::lock_guard(_mutex);
        _requests.push_back(request);
    }
    return _inner.complete(request);
}

std::vector<CompletionRequest> RecordingBackend::requests() const
{
    auto const lock = std::lock_guard(_mutex);
    return _requests;
}

std::vector<CompletionRequest> RecordingBackend::requestsFor(std::string_view agentRole) const
{
    auto const lock = std::lock_guard(_mutex);
    auto out = std::vector<CompletionRequest> {};
    for (auto const& r: _requests)
        if (r.caller.agentRole == agentRole)
            out.push_back(r);
    return out;
}

std::size_t RecordingBackend::count() const
{
    auto const lock = std::lock_guard(_mutex);
    return _requests.size();
}

// }}}

// {{{ LiveBackend

LiveBackend::LiveBackend(LiveBackendOptions options):
    _options(std::move(options)), _inFlight(std::max(1, _options.maxInFlight))
{
    auto const& url = _options.baseUrl;
    auto const schemeEnd = url.find("://");
    if (schemeEnd == std::string::npos)
        throw ConfigError("backend base URL must include a scheme: " + url);
    _scheme = url.substr(0, schemeEnd);
    auto const rest = url.substr(schemeEnd + 3);
    auto const slash = rest.find('/');
    _hostPort = rest.substr(0, slash);
    _pathPrefix = slash == std::string::npos ? std::string {} : rest.substr(slash);
    while (!_pathPrefix.empty() && _pathPrefix.back() == '/')
        _pathPrefix.pop_back();
    if (_options.model.empty())
        throw ConfigError("live backend requires a model name");
}

std::unique_ptr<LiveBackend> LiveBackend::fromSpec(const BackendSpec& spec)
{
    auto options = LiveBackendOptions {
        .baseUrl = spec.baseUrl,
        .model = spec.model,
        .apiKey = {},
        .retries = spec.retries,
        .maxInFlight = spec.maxInFlight,
    };
    if (auto const* key = std::getenv(spec.apiKeyEnv.c_str()))
        options.apiKey = key;
    return std::make_unique<LiveBackend>(std::move(options));
}

Json LiveBackend::buildPayload(const CompletionRequest& request) const
{
    auto messages = Json::array();
    for (auto const& m: request.messages)
        messages.push_back(Json { { "role", toString(m.role) }, { "content", m.content } });
    auto payload = Json {
        { "model", _options.model },
        { "messages", std::move(messages) },
        { "temperature", request.temperature },
        { "max_tokens", request.maxTokens },
    };
    if (request.schema)
        payload["response_format"] = Json { { "type", "json_object" } };
    return payload;
}

std::string LiveBackend::post(const std::string& body)
{
    auto client = httplib::Client(_scheme + "://" + _hostPort);
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(_options.timeout);

    auto headers = httplib::Headers {};
    if (!_options.apiKey.empty())
        headers.emplace("Authorization", "Bearer " + _options.apiKey);

    auto const path = _pathPrefix + "/chat/completions";
    auto lastError = std::string {};
    auto backoff = _options.initialBackoff;
    for (auto attempt = 0; attempt <= _options.retries; ++attempt)
    {
        if (attempt > 0)
        {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }

        auto const response = client.Post(path, headers, body, "application/json");
        if (!response)
        {
            lastError = fmt::format("request failed: {}", httplib::to_string(response.error()));
            continue;
        }
        if (response->status == 429 || response->status >= 500)
        {
            lastError = fmt::format("remote returned HTTP {}", response->status);
            continue;
        }
        if (response->status != 200)
            throw TransportError(fmt::format("remote returned HTTP {}: {}", response->status, response->body));
        return response->body;
    }
    throw TransportError(fmt::format("{} (after {} retries)", lastError, _options.retries));
}

std::string LiveBackend::complete(const CompletionRequest& request)
{
    validateRequest(request);
    auto const body = buildPayload(request).dump();

    _inFlight.acquire();
    auto responseBody = std::string {};
    try
    {
        responseBody = post(body);
    }
    catch (...)
    {
        _inFlight.release();
        throw;
    }
    _inFlight.release();

    auto const reply = Json::parse(responseBody, nullptr, false);
    if (reply.is_discarded())
        throw TransportError("remote returned a non-JSON body");
    try
    {
        auto const& content = reply.at("choices").at(0).at("message").at("content");
        return content.is_string() ? content.get<std::string>() : std::string {};
    }
    catch (const Json::exception&)
    {
        throw TransportError("remote reply lacks choices[0].message.content");
    }
}

// }}}

// {{{ structured completion

ParseOutcome parseStructured(std::string_view text,
                             const Schema& schema,
                             Backend& backend,
                             const CompletionRequest& original)
{
    auto diagnostics = std::vector<std::string> {};
    if (auto outcome = tryParseStructured(text, schema, diagnostics))
        return std::move(*outcome);

    auto repair = original;
    repair.caller.agentRole += agent::RepairSuffix;
    repair.messages.push_back(ChatMessage { ChatRole::Assistant, std::string(text) });
    repair.messages.push_back(ChatMessage {
        ChatRole::User,
        fmt::format("Your previous reply could not be used ({}). Reply with exactly one JSON object of the "
                    "shape {} and nothing else.",
                    fmt::join(diagnostics, "; "),
                    schema.describe()),
    });

    auto repairedText = std::string {};
    try
    {
        repairedText = backend.complete(repair);
    }
    catch (const ScenarioMiss& e)
    {
        diagnostics.push_back(fmt::format("re-prompt: {}", e.what()));
        throw ParseFailure(std::string(text), std::move(diagnostics));
    }

    auto repairDiagnostics = std::vector<std::string> {};
    if (auto outcome = tryParseStructured(repairedText, schema, repairDiagnostics))
        return ParseOutcome { std::move(outcome->value), ParseStage::Reprompt };

    for (auto& d: repairDiagnostics)
        diagnostics.push_back("re-prompt " + d);
    throw ParseFailure(std::string(text), std::move(diagnostics));
}

ParseOutcome completeStructured(Backend& backend, const CompletionRequest& request)
{
    if (!request.schema)
        throw PreconditionViolation("structured completion requires a schema");
    auto const text = backend.complete(request);
    return parseStructured(text, *request.schema, backend, request);
}

// }}}

} // namespace pathfinder
