#pragma once

// JSON mapping for the persisted and transmitted domain types.
//
// Decoders reject unknown keys with a ValidationError naming the field so
// that schema drift is caught at the boundary.

#include <initializer_list>
#include <string_view>

#include <json.hpp>

#include "visbench/calibration.hpp"
#include "visbench/hue.hpp"
#include "visbench/metrics.hpp"
#include "visbench/session.hpp"
#include "visbench/staircase.hpp"

namespace visbench {

/// Throws ValidationError("<context>.<key>") for any key outside `allowed`.
void expect_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                 std::string_view context);

}  // namespace visbench

namespace visbench::calibration {
void to_json(nlohmann::json& j, const DisplayGeometry& g);
void from_json(const nlohmann::json& j, DisplayGeometry& g);
void to_json(nlohmann::json& j, const LuminanceCurve& c);
void from_json(const nlohmann::json& j, LuminanceCurve& c);
void to_json(nlohmann::json& j, const CalibrationProfile& p);
void from_json(const nlohmann::json& j, CalibrationProfile& p);
}  // namespace visbench::calibration

namespace visbench::metrics {
void to_json(nlohmann::json& j, const AcuityResult& r);
void from_json(const nlohmann::json& j, AcuityResult& r);
void to_json(nlohmann::json& j, const ContrastResult& r);
void from_json(const nlohmann::json& j, ContrastResult& r);
}  // namespace visbench::metrics

namespace visbench::hue {
void to_json(nlohmann::json& j, const HueArrangement& a);
void from_json(const nlohmann::json& j, HueArrangement& a);
void to_json(nlohmann::json& j, const TesReport& r);
void from_json(const nlohmann::json& j, TesReport& r);
}  // namespace visbench::hue

namespace visbench::staircase {
void to_json(nlohmann::json& j, const StaircaseConfig& c);
void to_json(nlohmann::json& j, const StaircaseState& s);
}  // namespace visbench::staircase

namespace visbench::session {
void to_json(nlohmann::json& j, const LightLevel& l);
void from_json(const nlohmann::json& j, LightLevel& l);
void to_json(nlohmann::json& j, const Condition& c);
void from_json(const nlohmann::json& j, Condition& c);
void to_json(nlohmann::json& j, const SessionOptions& o);
void from_json(const nlohmann::json& j, SessionOptions& o);
void to_json(nlohmann::json& j, const SessionPlan& p);
void from_json(const nlohmann::json& j, SessionPlan& p);
void to_json(nlohmann::json& j, const TrialRecord& r);
void from_json(const nlohmann::json& j, TrialRecord& r);
void to_json(nlohmann::json& j, const TestOutcome& o);
void to_json(nlohmann::json& j, const SessionResult& r);
void to_json(nlohmann::json& j, const Prompt& p);
}  // namespace visbench::session
