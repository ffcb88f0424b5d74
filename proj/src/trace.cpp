// SPDX-License-Identifier: Apache-2.0
#include <pathfinder/trace.hpp>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include <chrono>
#include <fstream>

#include <unistd.h>

namespace pathfinder
{

bool TraceEvent::sameContent(const TraceEvent& other) const
{
    return seq == other.seq && kind == other.kind && payload == other.payload;
}

Json toJson(const TraceEvent& event)
{
    return Json {
        { "schema_version", SchemaVersion },
        { "seq", event.seq },
        { "timestamp", event.timestamp },
        { "kind", toString(event.kind) },
        { "payload", event.payload },
    };
}

TraceEvent traceEventFromJson(const Json& line)
{
    if (!line.is_object())
        throw Error("trace line is not an object");
    if (line.value("schema_version", 0) != SchemaVersion)
        throw Error(fmt::format("unsupported schema_version {}", line.value("schema_version", 0)));
    auto event = TraceEvent {};
    event.seq = line.at("seq").get<std::uint64_t>();
    event.timestamp = line.value("timestamp", std::string {});
    auto const kind = line.at("kind").get<std::string>();
    auto const parsed = parseEventKind(kind);
    if (!parsed)
        throw Error("unknown event kind " + kind);
    event.kind = *parsed;
    event.payload = line.value("payload", Json::object());
    return event;
}

std::string utcTimestamp()
{
    auto const now = std::chrono::system_clock::now();
    auto const millis = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    return fmt::format("{:%Y-%m-%dT%H:%M:%S}.{:03}Z", fmt::gmtime(std::chrono::system_clock::to_time_t(now)), millis);
}

TraceStore::TraceStore(std::filesystem::path path): _path(std::move(path))
{
    std::error_code ec;
    if (_path.has_parent_path())
        std::filesystem::create_directories(_path.parent_path(), ec);
    _file = std::fopen(_path.c_str(), "w");
    if (!_file)
        throw TraceWriteError(fmt::format("cannot open trace file {}", _path.string()));
}

TraceStore::~TraceStore()
{
    if (_file)
        std::fclose(_file);
}

TraceEvent TraceStore::append(EventKind kind, Json payload)
{
    auto const lock = std::lock_guard(_mutex);
    if (_closed)
        throw RunClosed();

    auto event = TraceEvent {
        .seq = _events.size(),
        .timestamp = utcTimestamp(),
        .kind = kind,
        .payload = std::move(payload),
    };

    if (_file)
    {
        auto const line = toJson(event).dump() + "\n";
        if (std::fwrite(line.data(), 1, line.size(), _file) != line.size() || std::fflush(_file) != 0
            || ::fsync(::fileno(_file)) != 0)
            throw TraceWriteError(fmt::format("failed to write trace file {}", _path.string()));
    }

    _events.push_back(event);
    if (kind == EventKind::RunFinished)
        _closed = true;

    for (auto const& observer: _observers)
    {
        try
        {
            observer(event);
        }
        catch (...)
        {
            // Publishing is best-effort; the persisted line is authoritative.
        }
    }
    return event;
}

void TraceStore::addObserver(Observer observer)
{
    auto const lock = std::lock_guard(_mutex);
    for (auto const& event: _events)
        observer(event);
    _observers.push_back(std::move(observer));
}

std::vector<TraceEvent> TraceStore::events() const
{
    auto const lock = std::lock_guard(_mutex);
    return _events;
}

bool TraceStore::closed() const
{
    auto const lock = std::lock_guard(_mutex);
    return _closed;
}

std::filesystem::path tracePathFor(const std::filesystem::path& traceDir, std::string_view runId)
{
    return traceDir / (std::string(runId) + ".jsonl");
}

std::vector<TraceEvent> parseTrace(std::istream& in)
{
    auto events = std::vector<TraceEvent> {};
    auto line = std::string {};
    while (std::getline(in, line))
    {
        auto const expected = static_cast<std::uint64_t>(events.size());
        if (line.empty())
            continue;
        auto const json = Json::parse(line, nullptr, false);
        if (json.is_discarded())
            throw ReplayError(expected, "corrupt line");
        auto event = TraceEvent {};
        try
        {
            event = traceEventFromJson(json);
        }
        catch (const std::exception& e)
        {
            throw ReplayError(expected, fmt::format("corrupt line: {}", e.what()));
        }
        if (event.seq != expected)
            throw ReplayError(expected, fmt::format("sequence gap (found seq {})", event.seq));
        if (expected == 0 && event.kind != EventKind::RunStarted)
            throw ReplayError(0, "trace does not start with run_started");
        events.push_back(std::move(event));
    }
    if (events.empty())
        throw ReplayError(0, "empty trace");
    return events;
}

std::vector<TraceEvent> readTrace(const std::filesystem::path& path)
{
    auto in = std::ifstream(path);
    if (!in)
        throw Error(fmt::format("cannot open trace file {}", path.string()));
    return parseTrace(in);
}

} // namespace pathfinder
