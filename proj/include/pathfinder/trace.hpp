// SPDX-License-Identifier: Apache-2.0
#pragma once

// Append-only exploration trace. One JSON object per line:
//   {"schema_version":1,"seq":N,"timestamp":"...","kind":"...","payload":{...}}
// The store assigns dense sequence numbers starting at 0; a line is flushed
// and fsync'ed before append() returns.

#include <pathfinder/serialize.hpp>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <istream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace pathfinder
{

struct TraceEvent
{
    std::uint64_t seq = 0;
    std::string timestamp;
    EventKind kind = EventKind::RunStarted;
    Json payload = Json::object();

    /// Equality of logical content; timestamps are ignored.
    [[nodiscard]] bool sameContent(const TraceEvent& other) const;
};

[[nodiscard]] Json toJson(const TraceEvent& event);
/// Throws Error on a malformed line.
[[nodiscard]] TraceEvent traceEventFromJson(const Json& line);

[[nodiscard]] std::string utcTimestamp();

class EventSink
{
  public:
    virtual ~EventSink() = default;
    virtual TraceEvent append(EventKind kind, Json payload) = 0;
};

class TraceStore final: public EventSink
{
  public:
    using Observer = std::function<void(const TraceEvent&)>;

    /// Memory-only store.
    TraceStore() = default;
    /// File-backed store; parent directories are created. Throws TraceWriteError.
    explicit TraceStore(std::filesystem::path path);
    ~TraceStore() override;

    TraceStore(const TraceStore&) = delete;
    TraceStore& operator=(const TraceStore&) = delete;

    /// Sequences, persists and publishes the event. Throws RunClosed after
    /// run_finished, TraceWriteError if the line cannot be written.
    TraceEvent append(EventKind kind, Json payload) override;

    /// Observers run under the store lock, so they see events in seq order.
    /// The snapshot of already-appended events is delivered first.
    void addObserver(Observer observer);

    [[nodiscard]] std::vector<TraceEvent> events() const;
    [[nodiscard]] const std::filesystem::path& path() const noexcept { return _path; }
    [[nodiscard]] bool closed() const;

  private:
    std::filesystem::path _path;
    std::FILE* _file = nullptr;
    mutable std::mutex _mutex;
    std::vector<TraceEvent> _events;
    std::vector<Observer> _observers;
    bool _closed = false;
};

/// `traces/<run-id>.jsonl` under the given directory.
[[nodiscard]] std::filesystem::path tracePathFor(const std::filesystem::path& traceDir, std::string_view runId);

/// Reads and checks a trace: every line parses, seq values are consecutive
/// from 0, the first event is run_started. Throws ReplayError naming the seq.
[[nodiscard]] std::vector<TraceEvent> readTrace(const std::filesystem::path& path);
[[nodiscard]] std::vector<TraceEvent> parseTrace(std::istream& in);

} // namespace pathfinder
