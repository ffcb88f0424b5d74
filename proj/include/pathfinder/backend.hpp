// SPDX-License-Identifier: Apache-2.0
#pragma once

// Language-model backends: a live chat-completions client and a scripted
// stand-in keyed by (agent role, plan version, step id, iteration ordinal).

#include <pathfinder/model.hpp>
#include <pathfinder/structured.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

namespace pathfinder
{

enum class ChatRole
{
    System,
    User,
    Assistant,
    Tool,
};

[[nodiscard]] std::string_view toString(ChatRole role) noexcept;

struct ChatMessage
{
    ChatRole role = ChatRole::User;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

namespace agent
{
    inline constexpr std::string_view Analyzer = "analyzer";
    inline constexpr std::string_view Planner = "planner";
    inline constexpr std::string_view Expert = "expert";
    inline constexpr std::string_view Manager = "manager";
    inline constexpr std::string_view Judge = "judge";
    /// Appended to the agent role for the single corrective re-prompt.
    inline constexpr std::string_view RepairSuffix = "/repair";
} // namespace agent

struct CallerKey
{
    std::string agentRole;
    std::uint32_t planVersion = 0;
    std::string stepId;
    std::uint32_t iteration = 1;

    [[nodiscard]] std::string toString() const;

    auto operator<=>(const CallerKey&) const = default;
};

struct CompletionRequest
{
    std::vector<ChatMessage> messages;
    std::optional<Schema> schema;
    double temperature = 0.0;
    std::uint32_t maxTokens = 1024;
    CallerKey caller;
};

/// Throws PreconditionViolation if messages are empty, a system/user message
/// has empty content, or the caller key is incomplete.
void validateRequest(const CompletionRequest& request);

class Backend
{
  public:
    virtual ~Backend() = default;

    /// Returns the model's message text for the request.
    virtual std::string complete(const CompletionRequest& request) = 0;
};

// {{{ scripted

inline constexpr std::string_view NoScriptFallback = "NO-SCRIPT";

struct ScriptedScenario
{
    std::map<CallerKey, std::string> entries;
    bool strict = true;

    /// Scenario document: {"strict": bool, "entries": [{"role", "plan_version",
    /// "step_id", "iteration", "response"}]}. A non-string response is stored
    /// as its compact JSON text.
    static ScriptedScenario fromJson(const Json& document);
    static ScriptedScenario load(const std::filesystem::path& path);

    [[nodiscard]] Json toJson() const;

    void add(CallerKey key, std::string response);
    void add(CallerKey key, const char* response) { add(std::move(key), std::string(response)); }
    void add(CallerKey key, const Json& response) { add(std::move(key), response.dump()); }
};

class ScriptedBackend final: public Backend
{
  public:
    explicit ScriptedBackend(ScriptedScenario scenario);

    std::string complete(const CompletionRequest& request) override;

    [[nodiscard]] const ScriptedScenario& scenario() const noexcept { return _scenario; }

  private:
    ScriptedScenario const _scenario;
};

// }}}

/// Records every request passed through to the wrapped backend.
class RecordingBackend final: public Backend
{
  public:
    explicit RecordingBackend(Backend& inner): _inner(inner) {}

    std::string complete(const CompletionRequest& request) override;

    [[nodiscard]] std::vector<CompletionRequest> requests() const;
    [[nodiscard]] std::vector<CompletionRequest> requestsFor(std::string_view agentRole) const;
    [[nodiscard]] std::size_t count() const;

  private:
    Backend& _inner;
    mutable std::mutex _mutex;
    std::vector<CompletionRequest> _requests;
};

// {{{ live

struct LiveBackendOptions
{
    std::string baseUrl;
    std::string model;
    std::string apiKey;
    int retries = 3;
    int maxInFlight = 4;
    std::chrono::milliseconds initialBackoff { 500 };
    std::chrono::seconds timeout { 120 };
};

/// OpenAI-compatible chat-completions client.
class LiveBackend final: public Backend
{
  public:
    explicit LiveBackend(LiveBackendOptions options);

    /// Reads the API key from the environment variable named in the spec.
    static std::unique_ptr<LiveBackend> fromSpec(const BackendSpec& spec);

    std::string complete(const CompletionRequest& request) override;

    [[nodiscard]] Json buildPayload(const CompletionRequest& request) const;

  private:
    std::string post(const std::string& body);

    LiveBackendOptions _options;
    std::string _scheme;
    std::string _hostPort;
    std::string _pathPrefix;
    std::counting_semaphore<> _inFlight;
};

// }}}

/// Parses with the full repair pipeline; stage 4 re-prompts through the
/// backend once using the request's caller key with RepairSuffix appended.
[[nodiscard]] ParseOutcome completeStructured(Backend& backend, const CompletionRequest& request);

[[nodiscard]] ParseOutcome parseStructured(std::string_view text,
                                           const Schema& schema,
                                           Backend& backend,
                                           const CompletionRequest& original);

} // namespace pathfinder
