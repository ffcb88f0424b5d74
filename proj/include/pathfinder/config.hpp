// SPDX-License-Identifier: Apache-2.0
#pragma once

// Plain-text run configuration: one `key = value` per line, `#` starts a
// comment. Secrets never appear here; the live backend reads its key from
// the environment variable named by api_key_env.
//
//   max_replans, max_expert_iterations, max_total_iterations
//   human_response_timeout   seconds, or with an ms/s suffix
//   hitl_enabled             true/false
//   backend                  scripted | live
//   scenario, base_url, model, api_key_env, retries, max_in_flight
//   temperature, max_tokens, transcript_window, parallel_steps
//   prompt_dir, trace_dir, corpus, bind (host:port), bench_parallelism
//   role.<id>.description, role.<id>.tools (comma-separated)

#include <pathfinder/agents.hpp>

#include <filesystem>
#include <istream>
#include <string>
#include <utility>
#include <vector>

namespace pathfinder
{

struct AppConfig
{
    RunConfig run;
    ExpertRoster roster = ExpertRoster::defaults();
    std::string promptDir;
    std::string traceDir = "traces";
    std::string corpus;
    std::string bind = "127.0.0.1:8080";
    std::size_t benchParallelism = 1;
    /// Set once a role.* key has replaced the default roster.
    bool rosterConfigured = false;
};

using Setting = std::pair<std::string, std::string>;

/// Ordered settings; throws ConfigError naming `source:line` on a line
/// without '='.
[[nodiscard]] std::vector<Setting> parseSettings(std::istream& in, std::string_view source);

/// Throws ConfigError naming the key on an unknown key or bad value.
void applySetting(AppConfig& config, std::string_view key, std::string_view value);

/// Throws ConfigError naming the path if it cannot be read.
[[nodiscard]] AppConfig loadConfig(const std::filesystem::path& path);

/// Applies the settings, then validates budgets and roster.
void applySettings(AppConfig& config, const std::vector<Setting>& settings);

struct Endpoint
{
    std::string host;
    int port = 0;
};

/// "host:port" or ":port"; throws ConfigError.
[[nodiscard]] Endpoint parseEndpoint(std::string_view text);

} // namespace pathfinder
