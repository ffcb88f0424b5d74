// SPDX-License-Identifier: Apache-2.0
#include <pathfinder/hitl.hpp>

#include <httplib.h>

#include <fmt/format.h>

#include <algorithm>

namespace pathfinder
{

std::string_view toString(SubmitResult result) noexcept
{
    switch (result)
    {
        case SubmitResult::Accepted: return "accepted";
        case SubmitResult::UnknownRequest: return "unknown request";
        case SubmitResult::AlreadyAnswered: return "already answered";
    }
    return "unknown";
}

// {{{ registry

std::string AssistanceRegistry::open(AssistanceRequest request)
{
    auto const lock = std::lock_guard(_mutex);
    auto id = fmt::format("R{}", _nextId++);
    request.id = id;
    _entries.emplace(id, Entry { std::move(request), State::Open, std::nullopt });
    return id;
}

SubmitResult AssistanceRegistry::submit(std::string_view runId, std::string_view requestId, HumanReply reply)
{
    auto const lock = std::lock_guard(_mutex);
    auto const it = _entries.find(requestId);
    if (it == _entries.end() || it->second.request.runId != runId)
        return SubmitResult::UnknownRequest;
    if (it->second.state != State::Open)
        return SubmitResult::AlreadyAnswered;
    it->second.state = State::Answered;
    it->second.reply = std::move(reply);
    _resolved.notify_all();
    return SubmitResult::Accepted;
}

std::optional<HumanReply> AssistanceRegistry::await(const std::string& requestId, std::chrono::milliseconds timeout)
{
    auto lock = std::unique_lock(_mutex);
    auto const it = _entries.find(requestId);
    if (it == _entries.end())
        throw GatewayUnavailable("unknown assistance request " + requestId);
    auto& entry = it->second;
    _resolved.wait_for(lock, timeout, [&] { return entry.state != State::Open; });
    if (entry.state == State::Open)
        entry.state = State::TimedOut;
    return entry.state == State::Answered ? entry.reply : std::nullopt;
}

std::vector<AssistanceRequest> AssistanceRegistry::openRequests(std::string_view runId) const
{
    auto const lock = std::lock_guard(_mutex);
    auto out = std::vector<AssistanceRequest> {};
    for (auto const& [id, entry]: _entries)
        if (entry.state == State::Open && entry.request.runId == runId)
            out.push_back(entry.request);
    std::ranges::sort(out, {}, [](auto const& r) { return std::stoull(r.id.substr(1)); });
    return out;
}

// }}}

void to_json(Json& j, const RunSummary& v)
{
    j = Json {
        { "run_id", v.runId },
        { "phase", toString(v.phase) },
        { "plan_version", v.planVersion },
        { "events", v.events },
        { "finished", v.finished },
    };
}

HitlService::HitlService() = default;

HitlService::~HitlService()
{
    stop();
}

void HitlService::attach(const std::string& runId, TraceStore& store)
{
    {
        auto const lock = std::lock_guard(_mutex);
        _runs.try_emplace(runId);
    }
    store.addObserver([this, runId](const TraceEvent& event) { publish(runId, event); });
}

void HitlService::publish(const std::string& runId, const TraceEvent& event)
{
    auto const lock = std::lock_guard(_mutex);
    auto& run = _runs[runId];
    if (event.seq != run.events.size())
        return; // duplicate delivery; the record is already ordered
    run.events.push_back(event);
    try
    {
        run.state = applyEvent(std::move(run.state), event);
    }
    catch (const std::exception&)
    {
        // The snapshot is informational; the event stream stays authoritative.
    }
    if (event.kind == EventKind::RunFinished)
        run.finished = true;
    for (auto const& [token, entry]: _subscribers)
        if (entry.first == runId)
            entry.second(event);
    _changed.notify_all();
}

std::uint64_t HitlService::subscribe(const std::string& runId, Subscriber subscriber)
{
    auto const lock = std::lock_guard(_mutex);
    if (auto const it = _runs.find(runId); it != _runs.end())
        for (auto const& event: it->second.events)
            subscriber(event);
    auto const token = _nextToken++;
    _subscribers.emplace(token, std::pair { runId, std::move(subscriber) });
    return token;
}

void HitlService::unsubscribe(std::uint64_t token)
{
    auto const lock = std::lock_guard(_mutex);
    _subscribers.erase(token);
}

std::vector<RunSummary> HitlService::runs() const
{
    auto const lock = std::lock_guard(_mutex);
    auto out = std::vector<RunSummary> {};
    for (auto const& [id, run]: _runs)
        out.push_back(RunSummary {
            .runId = id,
            .phase = run.state.phase,
            .planVersion = run.state.plan ? run.state.plan->version : 0,
            .events = run.events.size(),
            .finished = run.finished,
        });
    return out;
}

std::vector<TraceEvent> HitlService::events(std::string_view runId) const
{
    auto const lock = std::lock_guard(_mutex);
    auto const it = _runs.find(runId);
    return it == _runs.end() ? std::vector<TraceEvent> {} : it->second.events;
}

bool HitlService::knowsRun(std::string_view runId) const
{
    auto const lock = std::lock_guard(_mutex);
    return _runs.contains(runId);
}

std::string HitlService::open(AssistanceRequest request)
{
    return _registry.open(std::move(request));
}

std::optional<HumanReply> HitlService::await(const std::string& requestId, std::chrono::milliseconds timeout)
{
    return _registry.await(requestId, timeout);
}

SubmitResult HitlService::submitResponse(std::string_view runId, std::string_view requestId, HumanReply reply)
{
    return _registry.submit(runId, requestId, std::move(reply));
}

std::vector<AssistanceRequest> HitlService::openRequests(std::string_view runId) const
{
    return _registry.openRequests(runId);
}

// {{{ http

namespace
{
    void sendJson(httplib::Response& res, int status, const Json& body)
    {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    void sendError(httplib::Response& res, int status, std::string_view message)
    {
        sendJson(res, status, Json { { "error", message } });
    }

    std::string sseFrame(const TraceEvent& event)
    {
        return fmt::format("id: {}\nevent: {}\ndata: {}\n\n", event.seq, toString(event.kind), toJson(event).dump());
    }
} // namespace

void HitlService::installRoutes()
{
    auto& server = *_server;

    server.Get("/runs", [this](const httplib::Request&, httplib::Response& res) {
        sendJson(res, 200, Json(runs()));
    });

    server.Get(R"(/runs/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
        auto const runId = req.matches[1].str();
        if (!knowsRun(runId))
            return sendError(res, 404, "unknown run " + runId);

        // Catch-up starts after Last-Event-ID (reconnect) or at ?from=N.
        auto next = std::make_shared<std::size_t>(0);
        if (req.has_header("Last-Event-ID"))
            *next = std::stoull(req.get_header_value("Last-Event-ID")) + 1;
        else if (req.has_param("from"))
            *next = std::stoull(req.get_param_value("from"));

        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider("text/event-stream", [this, runId, next](std::size_t, httplib::DataSink& sink) {
            auto batch = std::vector<TraceEvent> {};
            auto finished = false;
            {
                auto lock = std::unique_lock(_mutex);
                auto const& run = _runs[runId];
                _changed.wait_for(lock, std::chrono::milliseconds(500), [&] {
                    return _stopping || run.events.size() > *next || run.finished;
                });
                if (_stopping)
                {
                    sink.done();
                    return true;
                }
                for (auto i = *next; i < run.events.size(); ++i)
                    batch.push_back(run.events[i]);
                *next = run.events.size();
                finished = run.finished;
            }
            for (auto const& event: batch)
            {
                auto const frame = sseFrame(event);
                if (!sink.write(frame.data(), frame.size()))
                    return false;
            }
            if (batch.empty() && !finished)
            {
                static constexpr std::string_view keepAlive = ": keep-alive\n\n";
                if (!sink.write(keepAlive.data(), keepAlive.size()))
                    return false;
            }
            if (finished)
                sink.done();
            return true;
        });
    });

    server.Get(R"(/runs/([^/]+)/assistance)", [this](const httplib::Request& req, httplib::Response& res) {
        auto const runId = req.matches[1].str();
        if (!knowsRun(runId))
            return sendError(res, 404, "unknown run " + runId);
        sendJson(res, 200, Json(openRequests(runId)));
    });

    server.Post(R"(/runs/([^/]+)/assistance/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        auto const runId = req.matches[1].str();
        auto const requestId = req.matches[2].str();
        auto const body = Json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object() || !body.contains("text") || !body["text"].is_string())
            return sendError(res, 400, "body must be a JSON object with a string field text");
        auto reply = HumanReply { body["text"].get<std::string>(), stringOr(body, "author", "anonymous") };
        if (normalizeText(reply.text).empty())
            return sendError(res, 400, "text must be non-empty");

        switch (submitResponse(runId, requestId, std::move(reply)))
        {
            case SubmitResult::Accepted:
                return sendJson(res, 200, Json { { "status", "accepted" }, { "request_id", requestId } });
            case SubmitResult::UnknownRequest: return sendError(res, 404, "unknown request " + requestId);
            case SubmitResult::AlreadyAnswered: return sendError(res, 409, "already answered");
        }
    });
}

void HitlService::start(const std::string& host, int port)
{
    if (_server)
        throw ConfigError("gateway already started");
    _server = std::make_unique<httplib::Server>();
    // httplib's default SO_REUSEPORT would let a second gateway share a busy port.
    _server->set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    installRoutes();

    auto bound = port == 0 ? _server->bind_to_any_port(host) : (_server->bind_to_port(host, port) ? port : -1);
    if (bound < 0)
    {
        _server.reset();
        throw ConfigError(fmt::format("cannot bind {}:{} (port {} in use or unavailable)", host, port, port));
    }
    _port = bound;
    {
        auto const lock = std::lock_guard(_mutex);
        _stopping = false;
    }
    _thread = std::thread([this] { _server->listen_after_bind(); });
    // stop() is a no-op until the accept loop runs.
    _server->wait_until_ready();
}

void HitlService::stop()
{
    {
        auto const lock = std::lock_guard(_mutex);
        _stopping = true;
    }
    _changed.notify_all();
    if (_server)
        _server->stop();
    if (_thread.joinable())
        _thread.join();
    _server.reset();
}

void HitlService::wait()
{
    if (_thread.joinable())
        _thread.join();
}

// }}}

} // namespace pathfinder
