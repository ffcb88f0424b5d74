// SPDX-License-Identifier: Apache-2.0
#include <pathfinder/config.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <fstream>

namespace pathfinder
{

namespace
{
    std::string_view trim(std::string_view text)
    {
        auto const first = text.find_first_not_of(" \t\r\n");
        if (first == std::string_view::npos)
            return {};
        auto const last = text.find_last_not_of(" \t\r\n");
        return text.substr(first, last - first + 1);
    }

    template <typename T>
    T number(std::string_view key, std::string_view value)
    {
        auto result = T {};
        auto const* end = value.data() + value.size();
        auto const [ptr, ec] = std::from_chars(value.data(), end, result);
        if (ec != std::errc() || ptr != end)
            throw ConfigError(fmt::format("{}: expected a number, got '{}'", key, value));
        return result;
    }

    std::uint32_t budget(std::string_view key, std::string_view value)
    {
        if (!value.empty() && value.front() == '-')
            throw ConfigError(fmt::format("{}: must be >= 1", key));
        auto const n = number<std::uint32_t>(key, value);
        if (n < 1)
            throw ConfigError(fmt::format("{}: must be >= 1", key));
        return n;
    }

    bool flag(std::string_view key, std::string_view value)
    {
        if (value == "true" || value == "1" || value == "yes" || value == "on")
            return true;
        if (value == "false" || value == "0" || value == "no" || value == "off")
            return false;
        throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, value));
    }

    std::chrono::milliseconds duration(std::string_view key, std::string_view value)
    {
        auto scale = 1000.0;
        auto digits = value;
        if (digits.ends_with("ms"))
        {
            scale = 1.0;
            digits.remove_suffix(2);
        }
        else if (digits.ends_with("s"))
            digits.remove_suffix(1);
        auto const amount = number<double>(key, trim(digits));
        if (amount <= 0)
            throw ConfigError(fmt::format("{}: must be > 0", key));
        return std::chrono::milliseconds(static_cast<std::int64_t>(amount * scale));
    }
} // namespace

std::vector<Setting> parseSettings(std::istream& in, std::string_view source)
{
    auto out = std::vector<Setting> {};
    auto line = std::string {};
    auto number = 0;
    while (std::getline(in, line))
    {
        ++number;
        auto text = std::string_view(line);
        if (auto const hash = text.find('#'); hash != std::string_view::npos)
            text = text.substr(0, hash);
        text = trim(text);
        if (text.empty())
            continue;
        auto const eq = text.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(fmt::format("{}:{}: expected key = value", source, number));
        auto key = trim(text.substr(0, eq));
        if (key.empty())
            throw ConfigError(fmt::format("{}:{}: empty key", source, number));
        out.emplace_back(std::string(key), std::string(trim(text.substr(eq + 1))));
    }
    return out;
}

void applySetting(AppConfig& config, std::string_view key, std::string_view value)
{
    auto& run = config.run;
    if (key == "max_replans")
        run.maxReplans = budget(key, value);
    else if (key == "max_expert_iterations")
        run.maxExpertIterations = budget(key, value);
    else if (key == "max_total_iterations")
        run.maxTotalIterations = budget(key, value);
    else if (key == "human_response_timeout")
        run.humanResponseTimeout = duration(key, value);
    else if (key == "hitl_enabled")
        run.hitlEnabled = flag(key, value);
    else if (key == "backend")
    {
        if (value == "scripted")
            run.backend.kind = BackendKind::Scripted;
        else if (value == "live")
            run.backend.kind = BackendKind::Live;
        else
            throw ConfigError(fmt::format("backend: expected scripted or live, got '{}'", value));
    }
    else if (key == "scenario")
        run.backend.scenarioPath = value;
    else if (key == "base_url")
        run.backend.baseUrl = value;
    else if (key == "model")
        run.backend.model = value;
    else if (key == "api_key_env")
        run.backend.apiKeyEnv = value;
    else if (key == "retries")
        run.backend.retries = number<int>(key, value);
    else if (key == "max_in_flight")
        run.backend.maxInFlight = static_cast<int>(budget(key, value));
    else if (key == "temperature")
        run.temperature = number<double>(key, value);
    else if (key == "max_tokens")
        run.maxTokens = budget(key, value);
    else if (key == "transcript_window")
        run.transcriptWindow = budget(key, value);
    else if (key == "parallel_steps")
        run.parallelSteps = budget(key, value);
    else if (key == "prompt_dir")
        config.promptDir = value;
    else if (key == "trace_dir")
        config.traceDir = value;
    else if (key == "corpus")
        config.corpus = value;
    else if (key == "bind")
        config.bind = value;
    else if (key == "bench_parallelism")
        config.benchParallelism = budget(key, value);
    else if (key.starts_with("role."))
    {
        auto const rest = key.substr(5);
        auto const dot = rest.rfind('.');
        if (dot == std::string_view::npos || dot == 0)
            throw ConfigError(fmt::format("{}: expected role.<id>.description or role.<id>.tools", key));
        auto const id = rest.substr(0, dot);
        auto const field = rest.substr(dot + 1);
        if (field != "description" && field != "tools")
            throw ConfigError(fmt::format("unknown config key {}", key));

        // Roles named by configuration replace the defaults as a whole.
        if (!config.rosterConfigured)
        {
            config.roster.roles.clear();
            config.rosterConfigured = true;
        }
        auto it = std::ranges::find(config.roster.roles, id, &ExpertRole::id);
        if (it == config.roster.roles.end())
        {
            config.roster.roles.push_back(ExpertRole { std::string(id), {}, {} });
            it = std::prev(config.roster.roles.end());
        }
        if (field == "description")
            it->description = value;
        else
        {
            it->tools.clear();
            auto rest = value;
            while (!rest.empty())
            {
                auto const comma = rest.find(',');
                auto const tool = trim(rest.substr(0, comma));
                if (!tool.empty())
                    it->tools.emplace_back(tool);
                rest = comma == std::string_view::npos ? std::string_view {} : rest.substr(comma + 1);
            }
        }
    }
    else
        throw ConfigError(fmt::format("unknown config key {}", key));
}

void applySettings(AppConfig& config, const std::vector<Setting>& settings)
{
    for (auto const& [key, value]: settings)
        applySetting(config, key, value);
    validateConfig(config.run);
    config.roster.validate();
}

AppConfig loadConfig(const std::filesystem::path& path)
{
    auto in = std::ifstream(path);
    if (!in)
        throw ConfigError(fmt::format("cannot open config file {}", path.string()));
    auto config = AppConfig {};
    applySettings(config, parseSettings(in, path.string()));
    return config;
}

Endpoint parseEndpoint(std::string_view text)
{
    auto const colon = text.rfind(':');
    if (colon == std::string_view::npos)
        throw ConfigError(fmt::format("bind: expected host:port, got '{}'", text));
    auto endpoint = Endpoint {};
    endpoint.host = colon == 0 ? std::string("127.0.0.1") : std::string(text.substr(0, colon));
    endpoint.port = number<int>("bind", text.substr(colon + 1));
    if (endpoint.port < 0 || endpoint.port > 65535)
        throw ConfigError(fmt::format("bind: port {} out of range", endpoint.port));
    return endpoint;
}

} // namespace pathfinder
