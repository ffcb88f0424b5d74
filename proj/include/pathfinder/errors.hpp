// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pathfinder
{

class Error: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

class ConfigError: public Error
{
  public:
    using Error::Error;
};

class InvalidReport: public Error
{
  public:
    using Error::Error;
};

class PreconditionViolation: public Error
{
  public:
    using Error::Error;
};

/// Remote or network failure. Retried by the live backend before surfacing.
class TransportError: public Error
{
  public:
    using Error::Error;
};

class ScenarioMiss: public Error
{
  public:
    explicit ScenarioMiss(std::string key): Error("scenario miss for key " + key), _key(std::move(key)) {}

    [[nodiscard]] const std::string& key() const noexcept { return _key; }

  private:
    std::string _key;
};

class ParseFailure: public Error
{
  public:
    ParseFailure(std::string rawText, std::vector<std::string> diagnostics);

    [[nodiscard]] const std::string& rawText() const noexcept { return _rawText; }
    [[nodiscard]] const std::vector<std::string>& diagnostics() const noexcept { return _diagnostics; }

  private:
    std::string _rawText;
    std::vector<std::string> _diagnostics;
};

/// Analyzer could not produce a valid ProblemAnalysis; aborts the run.
class AnalysisFailure: public Error
{
  public:
    AnalysisFailure(const std::string& what, std::string rawText): Error(what), _rawText(std::move(rawText)) {}

    [[nodiscard]] const std::string& rawText() const noexcept { return _rawText; }

  private:
    std::string _rawText;
};

class PlanningFailure: public Error
{
  public:
    PlanningFailure(const std::string& what, std::vector<std::string> violations = {}):
        Error(what), _violations(std::move(violations))
    {
    }

    [[nodiscard]] const std::vector<std::string>& violations() const noexcept { return _violations; }

  private:
    std::vector<std::string> _violations;
};

class SynthesisFailure: public Error
{
  public:
    using Error::Error;
};

class TraceWriteError: public Error
{
  public:
    using Error::Error;
};

class RunClosed: public Error
{
  public:
    RunClosed(): Error("run closed") {}
};

class ReplayError: public Error
{
  public:
    ReplayError(std::uint64_t seq, const std::string& what):
        Error("replay error at seq " + std::to_string(seq) + ": " + what), _seq(seq)
    {
    }

    [[nodiscard]] std::uint64_t seq() const noexcept { return _seq; }

  private:
    std::uint64_t _seq;
};

class DatasetError: public Error
{
  public:
    DatasetError(std::size_t line, const std::string& what):
        Error("dataset line " + std::to_string(line) + ": " + what), _line(line)
    {
    }

    [[nodiscard]] std::size_t line() const noexcept { return _line; }

  private:
    std::size_t _line;
};

} // namespace pathfinder
