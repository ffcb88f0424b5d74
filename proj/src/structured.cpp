// SPDX-License-Identifier: Apache-2.0
#include <pathfinder/structured.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cctype>

namespace pathfinder
{

namespace
{
    std::string_view trim(std::string_view text)
    {
        while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front())))
            text.remove_prefix(1);
        while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back())))
            text.remove_suffix(1);
        return text;
    }

    bool kindMatches(const Json& value, FieldKind kind)
    {
        switch (kind)
        {
            case FieldKind::Any: return true;
            case FieldKind::String: return value.is_string();
            case FieldKind::Number: return value.is_number();
            case FieldKind::Integer: return value.is_number_integer();
            case FieldKind::Boolean: return value.is_boolean();
            case FieldKind::Array: return value.is_array();
            case FieldKind::Object: return value.is_object();
        }
        return false;
    }

    std::string_view kindName(FieldKind kind)
    {
        switch (kind)
        {
            case FieldKind::Any: return "any";
            case FieldKind::String: return "string";
            case FieldKind::Number: return "number";
            case FieldKind::Integer: return "integer";
            case FieldKind::Boolean: return "boolean";
            case FieldKind::Array: return "array";
            case FieldKind::Object: return "object";
        }
        return "?";
    }

    std::optional<Json> attempt(std::string_view candidate,
                                const Schema& schema,
                                std::string_view stageName,
                                std::vector<std::string>& diagnostics)
    {
        auto value = Json::parse(candidate, nullptr, false);
        if (value.is_discarded())
        {
            diagnostics.push_back(fmt::format("{}: not valid JSON", stageName));
            return std::nullopt;
        }
        if (auto const problems = schema.check(value); !problems.empty())
        {
            diagnostics.push_back(fmt::format("{}: {}", stageName, fmt::join(problems, ", ")));
            return std::nullopt;
        }
        return value;
    }
} // namespace

std::vector<std::string> Schema::check(const Json& value) const
{
    auto problems = std::vector<std::string> {};
    if (!value.is_object())
    {
        problems.emplace_back("expected a JSON object");
        return problems;
    }
    for (auto const& field: fields)
    {
        auto const it = value.find(field.name);
        if (it == value.end() || it->is_null())
        {
            if (field.required)
                problems.push_back(fmt::format("missing required field '{}'", field.name));
            continue;
        }
        if (!kindMatches(*it, field.kind))
            problems.push_back(fmt::format("field '{}' should be {}", field.name, kindName(field.kind)));
    }
    return problems;
}

std::string Schema::describe() const
{
    auto parts = std::vector<std::string> {};
    for (auto const& field: fields)
        parts.push_back(fmt::format("\"{}\": {}{}", field.name, kindName(field.kind), field.required ? "" : "?"));
    return fmt::format("{{{}}}", fmt::join(parts, ", "));
}

std::string stripCodeFences(std::string_view text)
{
    auto const body = trim(text);
    auto const open = body.find("```");
    if (open == std::string_view::npos)
        return std::string(body);
    auto const close = body.rfind("```");
    if (close == open)
        return std::string(body);

    auto inner = body.substr(open + 3, close - open - 3);
    // Drop a language tag such as "json" on the opening fence line.
    if (auto const eol = inner.find('\n'); eol != std::string_view::npos)
    {
        auto const tag = trim(inner.substr(0, eol));
        auto const isTag = std::ranges::all_of(tag, [](unsigned char c) { return std::isalnum(c) || c == '_'; });
        if (isTag)
            inner.remove_prefix(eol + 1);
    }
    return std::string(trim(inner));
}

std::optional<std::string> firstBalancedBraces(std::string_view text)
{
    auto const start = text.find('{');
    if (start == std::string_view::npos)
        return std::nullopt;

    auto depth = 0;
    auto inString = false;
    auto escaped = false;
    for (auto i = start; i < text.size(); ++i)
    {
        auto const c = text[i];
        if (inString)
        {
            if (escaped)
                escaped = false;
            else if (c == '\\')
                escaped = true;
            else if (c == '"')
                inString = false;
            continue;
        }
        if (c == '"')
            inString = true;
        else if (c == '{')
            ++depth;
        else if (c == '}' && --depth == 0)
            return std::string(text.substr(start, i - start + 1));
    }
    return std::nullopt;
}

std::optional<ParseOutcome> tryParseStructured(std::string_view text,
                                               const Schema& schema,
                                               std::vector<std::string>& diagnostics)
{
    if (auto value = attempt(trim(text), schema, "direct", diagnostics))
        return ParseOutcome { std::move(*value), ParseStage::Direct };

    if (auto value = attempt(stripCodeFences(text), schema, "strip-fences", diagnostics))
        return ParseOutcome { std::move(*value), ParseStage::StripFences };

    if (auto region = firstBalancedBraces(text))
    {
        if (auto value = attempt(*region, schema, "balanced-braces", diagnostics))
            return ParseOutcome { std::move(*value), ParseStage::BalancedBraces };
    }
    else
    {
        diagnostics.emplace_back("balanced-braces: no balanced {...} region");
    }

    return std::nullopt;
}

ParseOutcome parseStructured(std::string_view text, const Schema& schema)
{
    auto diagnostics = std::vector<std::string> {};
    if (auto outcome = tryParseStructured(text, schema, diagnostics))
        return std::move(*outcome);
    throw ParseFailure(std::string(text), std::move(diagnostics));
}

} // namespace pathfinder
