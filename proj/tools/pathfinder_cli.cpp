// SPDX-License-Identifier: Apache-2.0
// Operator entry point: run, bench, replay, serve.
//
// Exit codes: 0 solved (or command succeeded), 2 unsolved, 1 usage or
// configuration error.

#include <pathfinder/bench.hpp>
#include <pathfinder/config.hpp>
#include <pathfinder/hitl.hpp>
#include <pathfinder/manager.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>

#include <pthread.h>

using namespace pathfinder;

namespace
{

constexpr int ExitSolved = 0;
constexpr int ExitUsage = 1;
constexpr int ExitUnsolved = 2;

struct CommonOptions
{
    std::string configPath;
    std::string corpusPath;
    std::string scenarioPath;
    std::string bind;
    std::string traceDir;
    std::optional<std::uint32_t> maxReplans;
    std::optional<std::uint32_t> maxIterations;
    std::vector<std::string> overrides;
    bool hitl = false;
};

void addCommon(CLI::App& cmd, CommonOptions& o, bool withHitl)
{
    cmd.add_option("--config", o.configPath, "Configuration file (key = value lines)");
    cmd.add_option("--corpus", o.corpusPath, "Corpus directory or JSONL file");
    cmd.add_option("--scenario", o.scenarioPath, "Scripted backend scenario (file or per-case directory)");
    cmd.add_option("--trace-dir", o.traceDir, "Directory for trace files");
    cmd.add_option("--max-replans", o.maxReplans, "Override max_replans");
    cmd.add_option("--max-iterations", o.maxIterations, "Override max_expert_iterations");
    cmd.add_option("--set", o.overrides, "Override any config key: --set key=value");
    if (withHitl)
    {
        cmd.add_flag("--hitl", o.hitl, "Enable human assistance through the gateway");
        cmd.add_option("--bind", o.bind, "Gateway address host:port");
    }
}

AppConfig resolveConfig(const CommonOptions& o)
{
    auto config = o.configPath.empty() ? AppConfig {} : loadConfig(o.configPath);
    auto settings = std::vector<Setting> {};
    for (auto const& item: o.overrides)
    {
        auto const eq = item.find('=');
        if (eq == std::string::npos)
            throw ConfigError(fmt::format("--set expects key=value, got '{}'", item));
        settings.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    }
    if (!o.corpusPath.empty())
        settings.emplace_back("corpus", o.corpusPath);
    if (!o.scenarioPath.empty())
    {
        settings.emplace_back("backend", "scripted");
        settings.emplace_back("scenario", o.scenarioPath);
    }
    if (!o.bind.empty())
        settings.emplace_back("bind", o.bind);
    if (!o.traceDir.empty())
        settings.emplace_back("trace_dir", o.traceDir);
    if (o.maxReplans)
        settings.emplace_back("max_replans", std::to_string(*o.maxReplans));
    if (o.maxIterations)
        settings.emplace_back("max_expert_iterations", std::to_string(*o.maxIterations));
    if (o.hitl)
        settings.emplace_back("hitl_enabled", "true");
    applySettings(config, settings);
    return config;
}

std::shared_ptr<const Corpus> loadCorpus(const AppConfig& config)
{
    if (config.corpus.empty())
        return std::make_shared<const Corpus>();
    if (!std::filesystem::exists(config.corpus))
        throw ConfigError(fmt::format("corpus not found: {}", config.corpus));
    return std::make_shared<const Corpus>(Corpus::load(config.corpus));
}

PromptLibrary loadPrompts(const AppConfig& config)
{
    return config.promptDir.empty() ? PromptLibrary::defaults() : PromptLibrary(config.promptDir);
}

std::unique_ptr<Backend> backendFromScenario(const std::filesystem::path& path)
{
    if (!std::filesystem::is_regular_file(path))
        throw ConfigError(fmt::format("scenario not found: {}", path.string()));
    return std::make_unique<ScriptedBackend>(ScriptedScenario::load(path));
}

std::unique_ptr<Backend> makeBackend(const RunConfig& run)
{
    if (run.backend.kind == BackendKind::Live)
        return LiveBackend::fromSpec(run.backend);
    if (run.backend.scenarioPath.empty())
        throw ConfigError("the scripted backend needs a scenario (--scenario or scenario = ...)");
    return backendFromScenario(run.backend.scenarioPath);
}

std::string makeRunId()
{
    auto const now = std::chrono::system_clock::now().time_since_epoch();
    return fmt::format("run-{}", std::chrono::duration_cast<std::chrono::milliseconds>(now).count());
}

// SIGINT/SIGTERM are blocked in every thread and taken here synchronously.
void waitForSignal(const sigset_t& signals)
{
    auto received = 0;
    sigwait(&signals, &received);
}

sigset_t blockTerminationSignals()
{
    auto signals = sigset_t {};
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    return signals;
}

int cmdRun(const std::string& question, const std::string& runIdOption, const CommonOptions& o)
{
    auto const config = resolveConfig(o);
    auto const corpus = loadCorpus(config);
    auto const prompts = loadPrompts(config);
    auto const tools = builtinTools(corpus);
    auto backend = makeBackend(config.run);

    auto const runId = runIdOption.empty() ? makeRunId() : runIdOption;
    auto trace = TraceStore(tracePathFor(config.traceDir, runId));

    auto gateway = std::unique_ptr<HitlService> {};
    if (config.run.hitlEnabled)
    {
        auto const endpoint = parseEndpoint(config.bind);
        gateway = std::make_unique<HitlService>();
        gateway->start(endpoint.host, endpoint.port);
        gateway->attach(runId, trace);
        std::cerr << fmt::format("gateway: http://{}:{}/runs/{}\n", endpoint.host, gateway->port(), runId);
    }

    auto services = RunServices { *backend, prompts, tools, config.roster, gateway.get(), {} };
    for (auto const& doc: corpus->documents())
        services.documentTitles.push_back(doc.title.empty() ? doc.id : doc.title);

    auto const problem = Problem { runId, question, {}, {} };
    auto const outcome = runProblem(problem, config.run, services, trace, runId);
    std::cerr << "trace: " << outcome.traceRef << "\n";
    if (outcome.status == RunStatus::Solved)
    {
        std::cout << *outcome.answer << "\n";
        return ExitSolved;
    }
    std::cerr << "unsolved: " << outcome.diagnostic << "\n";
    return ExitUnsolved;
}

int cmdBench(const std::string& datasetPath, const std::string& jsonPath, bool judge, const CommonOptions& o)
{
    auto const config = resolveConfig(o);
    if (!std::filesystem::exists(datasetPath))
        throw ConfigError(fmt::format("dataset not found: {}", datasetPath));
    auto const cases = loadDataset(datasetPath);
    auto const corpus = loadCorpus(config);
    auto const prompts = loadPrompts(config);

    auto backendFor = std::function<std::unique_ptr<Backend>(const BenchCase&)> {};
    if (config.run.backend.kind == BackendKind::Live)
        backendFor = [&](const BenchCase&) -> std::unique_ptr<Backend> { return LiveBackend::fromSpec(config.run.backend); };
    else
    {
        auto const scenario = std::filesystem::path(config.run.backend.scenarioPath);
        if (scenario.empty())
            throw ConfigError("the scripted backend needs a scenario (--scenario or scenario = ...)");
        if (std::filesystem::is_directory(scenario))
        {
            for (auto const& c: cases)
                if (!std::filesystem::is_regular_file(scenario / (c.id + ".json")))
                    throw ConfigError(fmt::format("scenario not found: {}", (scenario / (c.id + ".json")).string()));
            backendFor = [scenario](const BenchCase& c) { return backendFromScenario(scenario / (c.id + ".json")); };
        }
        else
        {
            auto const shared = ScriptedScenario::load(scenario);
            backendFor = [shared](const BenchCase&) -> std::unique_ptr<Backend> {
                return std::make_unique<ScriptedBackend>(shared);
            };
        }
    }

    auto const env = BenchEnvironment {
        .corpus = corpus,
        .prompts = prompts,
        .roster = config.roster,
        .backendFor = backendFor,
        .judgeFor = judge ? backendFor : decltype(backendFor) {},
        .traceDir = config.traceDir,
        .parallelism = config.benchParallelism,
    };
    auto const report = runBench(cases, config.run, env);

    for (auto const& r: report.cases)
        std::cout << fmt::format("{:<12} {:<18} {:<9} {}\n",
                                 r.benchCase.id,
                                 toString(r.benchCase.level),
                                 r.verdict.correct ? "correct" : "incorrect",
                                 r.verdict.explanation);
    std::cout << "\n" << formatTable(report.table);

    if (!jsonPath.empty())
    {
        auto out = std::ofstream(jsonPath);
        if (!out)
            throw ConfigError(fmt::format("cannot write report {}", jsonPath));
        out << toJson(report).dump(2) << "\n";
    }
    return ExitSolved;
}

int cmdReplay(const std::string& tracePath)
{
    if (!std::filesystem::is_regular_file(tracePath))
        throw ConfigError(fmt::format("trace not found: {}", tracePath));
    auto const result = replayFile(tracePath);
    auto const& state = result.state;
    std::cerr << fmt::format("phase: {}\nplan versions: {}\nreplans: {}\niterations: {}\n",
                             toString(state.phase),
                             state.plan ? state.plan->version : 0,
                             state.replansUsed,
                             state.totalIterations);
    if (!result.complete)
    {
        std::cerr << "incomplete run\n";
        return ExitUnsolved;
    }
    if (result.outcome->status == RunStatus::Solved)
    {
        std::cout << *result.outcome->answer << "\n";
        return ExitSolved;
    }
    std::cerr << "unsolved: " << result.outcome->diagnostic << "\n";
    return ExitUnsolved;
}

int cmdServe(const CommonOptions& o)
{
    auto const config = resolveConfig(o);
    auto const endpoint = parseEndpoint(config.bind);
    auto const signals = blockTerminationSignals();

    auto gateway = HitlService {};
    // Recorded traces become browsable runs.
    if (!o.traceDir.empty() && std::filesystem::is_directory(config.traceDir))
        for (auto const& entry: std::filesystem::directory_iterator(config.traceDir))
        {
            if (entry.path().extension() != ".jsonl")
                continue;
            try
            {
                auto const runId = entry.path().stem().string();
                for (auto const& event: readTrace(entry.path()))
                    gateway.publish(runId, event);
            }
            catch (const Error& e)
            {
                std::cerr << "skipping " << entry.path().string() << ": " << e.what() << "\n";
            }
        }

    gateway.start(endpoint.host, endpoint.port);
    std::cerr << fmt::format("serving on http://{}:{}\n", endpoint.host, gateway.port());
    waitForSignal(signals);
    gateway.stop();
    return ExitSolved;
}

} // namespace

int main(int argc, char** argv)
{
    auto app = CLI::App { "Hierarchical multi-agent problem solver" };
    app.require_subcommand(1);

    auto options = CommonOptions {};
    auto question = std::string {};
    auto runId = std::string {};
    auto dataset = std::string {};
    auto jsonReport = std::string {};
    auto tracePath = std::string {};
    auto judge = false;

    auto* run = app.add_subcommand("run", "Solve one problem");
    run->add_option("question", question, "The question to solve")->required();
    run->add_option("--run-id", runId, "Run identifier (default: time based)");
    addCommon(*run, options, true);

    auto* bench = app.add_subcommand("bench", "Run a benchmark dataset");
    bench->add_option("--dataset", dataset, "JSONL dataset")->required();
    bench->add_option("--json", jsonReport, "Write the machine-readable report here");
    bench->add_flag("--judge", judge, "Let the model judge free-text answers the lexical rule rejects");
    addCommon(*bench, options, false);

    auto* replayCmd = app.add_subcommand("replay", "Reconstruct a run from its trace");
    replayCmd->add_option("trace", tracePath, "Trace file")->required();

    auto* serve = app.add_subcommand("serve", "Serve the human-in-the-loop gateway");
    addCommon(*serve, options, true);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        auto const code = app.exit(e);
        return code == 0 ? 0 : ExitUsage;
    }

    try
    {
        if (*run)
            return cmdRun(question, runId, options);
        if (*bench)
            return cmdBench(dataset, jsonReport, judge, options);
        if (*replayCmd)
            return cmdReplay(tracePath);
        if (*serve)
            return cmdServe(options);
    }
    catch (const ReplayError& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return ExitUsage;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return ExitUsage;
    }
    return ExitUsage;
}
