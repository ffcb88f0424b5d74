// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace pathfinder
{

using PromptValues = std::map<std::string, std::string, std::less<>>;

/// Plain-text prompt templates with `{{name}}` placeholders, one file per
/// template (`<dir>/<name>.txt`). Loaded eagerly so a run never fails midway
/// on a missing file.
class PromptLibrary
{
  public:
    explicit PromptLibrary(std::filesystem::path directory);

    /// The templates shipped in resources/prompts.
    static PromptLibrary defaults();

    /// Throws ConfigError for an unknown template or a placeholder with no value.
    [[nodiscard]] std::string render(std::string_view name, const PromptValues& values) const;

    [[nodiscard]] bool has(std::string_view name) const;
    [[nodiscard]] const std::filesystem::path& directory() const noexcept { return _directory; }

  private:
    std::filesystem::path _directory;
    std::map<std::string, std::string, std::less<>> _templates;
};

/// Substitutes `{{name}}` placeholders; throws ConfigError on a missing value.
[[nodiscard]] std::string renderTemplate(std::string_view text, const PromptValues& values);

} // namespace pathfinder
