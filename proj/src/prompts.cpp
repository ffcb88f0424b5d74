// SPDX-License-Identifier: Apache-2.0
#include <pathfinder/errors.hpp>
#include <pathfinder/prompts.hpp>

#include <fmt/format.h>

#include <fstream>
#include <sstream>

#ifndef PATHFINDER_PROMPT_DIR
    #define PATHFINDER_PROMPT_DIR "resources/prompts"
#endif

namespace pathfinder
{

PromptLibrary::PromptLibrary(std::filesystem::path directory): _directory(std::move(directory))
{
    namespace fs = std::filesystem;
    if (!fs::is_directory(_directory))
        throw ConfigError(fmt::format("prompt directory {} does not exist", _directory.string()));
    for (auto const& entry: fs::directory_iterator(_directory))
    {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt")
            continue;
        auto in = std::ifstream(entry.path());
        auto text = std::stringstream {};
        text << in.rdbuf();
        _templates.emplace(entry.path().stem().string(), text.str());
    }
}

PromptLibrary PromptLibrary::defaults()
{
    return PromptLibrary(PATHFINDER_PROMPT_DIR);
}

bool PromptLibrary::has(std::string_view name) const
{
    return _templates.find(name) != _templates.end();
}

std::string PromptLibrary::render(std::string_view name, const PromptValues& values) const
{
    auto const it = _templates.find(name);
    if (it == _templates.end())
        throw ConfigError(fmt::format("prompt template '{}' not found in {}", name, _directory.string()));
    return renderTemplate(it->second, values);
}

std::string renderTemplate(std::string_view text, const PromptValues& values)
{
    auto out = std::string {};
    out.reserve(text.size());
    auto pos = std::size_t { 0 };
    while (pos < text.size())
    {
        auto const open = text.find("{{", pos);
        if (open == std::string_view::npos)
        {
            out.append(text.substr(pos));
            break;
        }
        auto const close = text.find("}}", open + 2);
        if (close == std::string_view::npos)
        {
            out.append(text.substr(pos));
            break;
        }
        out.append(text.substr(pos, open - pos));
        auto name = text.substr(open + 2, close - open - 2);
        while (!name.empty() && name.front() == ' ')
            name.remove_prefix(1);
        while (!name.empty() && name.back() == ' ')
            name.remove_suffix(1);
        auto const value = values.find(name);
        if (value == values.end())
            throw ConfigError(fmt::format("prompt placeholder '{}' has no value", name));
        out.append(value->second);
        pos = close + 2;
    }
    return out;
}

} // namespace pathfinder
