// SPDX-License-Identifier: Apache-2.0
#pragma once

// Human-in-the-loop gateway: fans run events out to observers with catch-up
// and brokers assistance requests between blocked expert steps and humans.
//
// HTTP surface:
//   GET  /runs                         run list with phase snapshots
//   GET  /runs/{id}/events             server-sent events, catch-up first
//   GET  /runs/{id}/assistance         open requests
//   POST /runs/{id}/assistance/{req}   {"text": ..., "author": ...}

#include <pathfinder/expert.hpp>
#include <pathfinder/state.hpp>

#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace httplib
{
class Server;
}

namespace pathfinder
{

enum class SubmitResult
{
    Accepted,
    UnknownRequest,
    AlreadyAnswered,
};

[[nodiscard]] std::string_view toString(SubmitResult result) noexcept;

/// Synchronized request map with single-resolution semantics: each request
/// is resolved exactly once, by the first reply or by the timeout.
class AssistanceRegistry
{
  public:
    /// Assigns ids R1, R2, ...
    std::string open(AssistanceRequest request);
    SubmitResult submit(std::string_view runId, std::string_view requestId, HumanReply reply);
    /// Waits for the reply; on timeout the request is closed as unanswered.
    std::optional<HumanReply> await(const std::string& requestId, std::chrono::milliseconds timeout);
    [[nodiscard]] std::vector<AssistanceRequest> openRequests(std::string_view runId) const;

  private:
    enum class State
    {
        Open,
        Answered,
        TimedOut,
    };
    struct Entry
    {
        AssistanceRequest request;
        State state = State::Open;
        std::optional<HumanReply> reply;
    };

    mutable std::mutex _mutex;
    std::condition_variable _resolved;
    std::map<std::string, Entry, std::less<>> _entries;
    std::uint64_t _nextId = 1;
};

struct RunSummary
{
    std::string runId;
    Phase phase = Phase::Init;
    std::uint32_t planVersion = 0;
    std::uint64_t events = 0;
    bool finished = false;
};

void to_json(Json& j, const RunSummary& v);

class HitlService final: public AssistanceChannel
{
  public:
    using Subscriber = std::function<void(const TraceEvent&)>;

    HitlService();
    ~HitlService() override;

    HitlService(const HitlService&) = delete;
    HitlService& operator=(const HitlService&) = delete;

    /// Publishes every event of the store under the given run id, starting
    /// with those already appended.
    void attach(const std::string& runId, TraceStore& store);

    /// Records the event and forwards it to the run's subscribers in seq order.
    void publish(const std::string& runId, const TraceEvent& event);

    /// Delivers the catch-up snapshot, then live events. Returns a token for
    /// unsubscribe().
    std::uint64_t subscribe(const std::string& runId, Subscriber subscriber);
    void unsubscribe(std::uint64_t token);

    [[nodiscard]] std::vector<RunSummary> runs() const;
    [[nodiscard]] std::vector<TraceEvent> events(std::string_view runId) const;
    [[nodiscard]] bool knowsRun(std::string_view runId) const;

    std::string open(AssistanceRequest request) override;
    std::optional<HumanReply> await(const std::string& requestId, std::chrono::milliseconds timeout) override;
    SubmitResult submitResponse(std::string_view runId, std::string_view requestId, HumanReply reply);
    [[nodiscard]] std::vector<AssistanceRequest> openRequests(std::string_view runId) const;

    /// Binds and serves in a background thread. Throws ConfigError naming
    /// the port if it cannot be bound. Port 0 picks a free port.
    void start(const std::string& host, int port);
    void stop();
    [[nodiscard]] int port() const noexcept { return _port; }
    /// Blocks until stop() is called.
    void wait();

  private:
    struct RunRecord
    {
        std::vector<TraceEvent> events;
        ManagerState state;
        bool finished = false;
    };

    void installRoutes();

    mutable std::mutex _mutex;
    std::condition_variable _changed;
    std::map<std::string, RunRecord, std::less<>> _runs;
    std::map<std::uint64_t, std::pair<std::string, Subscriber>> _subscribers;
    std::uint64_t _nextToken = 1;
    bool _stopping = false;

    AssistanceRegistry _registry;

    std::unique_ptr<httplib::Server> _server;
    std::thread _thread;
    int _port = 0;
};

} // namespace pathfinder
