// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <pathfinder/serialize.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace pathfinder
{

enum class FieldKind
{
    Any,
    String,
    Number,
    Integer,
    Boolean,
    Array,
    Object,
};

struct FieldSpec
{
    std::string name;
    FieldKind kind = FieldKind::Any;
    bool required = true;
};

/// Shape descriptor for a structured model reply: a JSON object with the
/// listed fields.
struct Schema
{
    std::string name;
    std::vector<FieldSpec> fields;

    /// Empty result means the value conforms.
    [[nodiscard]] std::vector<std::string> check(const Json& value) const;

    /// One-line field listing used in prompts, e.g. `{status: string, ...}`.
    [[nodiscard]] std::string describe() const;
};

enum class ParseStage
{
    Direct = 1,
    StripFences = 2,
    BalancedBraces = 3,
    Reprompt = 4,
};

struct ParseOutcome
{
    Json value;
    ParseStage stage = ParseStage::Direct;
};

/// Stages 1 to 3 of the repair pipeline. Throws ParseFailure with per-stage
/// diagnostics if none yields a conforming object.
[[nodiscard]] ParseOutcome parseStructured(std::string_view text, const Schema& schema);

/// Like the throwing overload but appends diagnostics instead.
[[nodiscard]] std::optional<ParseOutcome> tryParseStructured(std::string_view text,
                                                             const Schema& schema,
                                                             std::vector<std::string>& diagnostics);

[[nodiscard]] std::string stripCodeFences(std::string_view text);

/// First balanced `{...}` region, honoring JSON string literals.
[[nodiscard]] std::optional<std::string> firstBalancedBraces(std::string_view text);

} // namespace pathfinder
