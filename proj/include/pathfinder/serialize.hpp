// SPDX-License-Identifier: Apache-2.0
#pragma once

// Canonical JSON shapes of the protocol types. Field names are part of the
// wire contract shared by trace files, the gateway and the dashboard; bump
// SchemaVersion on any incompatible change.

#include <pathfinder/model.hpp>

#include <nlohmann/json.hpp>

namespace pathfinder
{

using Json = nlohmann::json;

void to_json(Json& j, const Problem& v);
void from_json(const Json& j, Problem& v);

void to_json(Json& j, const ConstraintScope& v);
void from_json(const Json& j, ConstraintScope& v);

void to_json(Json& j, const Constraint& v);
void from_json(const Json& j, Constraint& v);

void to_json(Json& j, const ProblemAnalysis& v);
void from_json(const Json& j, ProblemAnalysis& v);

void to_json(Json& j, const StepResult& v);
void from_json(const Json& j, StepResult& v);

void to_json(Json& j, const PlanStep& v);
void from_json(const Json& j, PlanStep& v);

void to_json(Json& j, const Plan& v);
void from_json(const Json& j, Plan& v);

void to_json(Json& j, const AttemptedAlternative& v);
void from_json(const Json& j, AttemptedAlternative& v);

void to_json(Json& j, const FeedbackReport& v);
void from_json(const Json& j, FeedbackReport& v);

void to_json(Json& j, const DeadEnd& v);
void from_json(const Json& j, DeadEnd& v);

void to_json(Json& j, const KnowledgeState& v);
void from_json(const Json& j, KnowledgeState& v);

void to_json(Json& j, const RunConfig& v);
void from_json(const Json& j, RunConfig& v);

/// Reads a string-valued member, or the fallback when absent or null.
[[nodiscard]] std::string stringOr(const Json& j, const char* key, std::string fallback = {});

/// Renders any JSON scalar as text; strings are returned unquoted.
[[nodiscard]] std::string scalarText(const Json& value);

} // namespace pathfinder
