#include "visbench/serialization.hpp"

#include <algorithm>
#include <string>

#include "visbench/errors.hpp"

using nlohmann::json;

namespace visbench {

void expect_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view context) {
  if (!j.is_object()) {
    throw ValidationError(std::string(context), std::string(context) + " must be an object");
  }
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      const std::string field = context.empty() ? key : std::string(context) + "." + key;
      throw ValidationError(field, "unknown field: " + field);
    }
  }
}

namespace {

template <typename T>
void optional_to(json& j, const char* key, const std::optional<T>& value) {
  j[key] = value ? json(*value) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

namespace calibration {

void to_json(json& j, const DisplayGeometry& g) {
  j = json{{"width_px", g.width_px},
           {"height_px", g.height_px},
           {"pixel_pitch_mm", g.pixel_pitch_mm},
           {"viewing_distance_mm", g.viewing_distance_mm}};
}

void from_json(const json& j, DisplayGeometry& g) {
  expect_keys(j, {"width_px", "height_px", "pixel_pitch_mm", "viewing_distance_mm"}, "geometry");
  j.at("width_px").get_to(g.width_px);
  j.at("height_px").get_to(g.height_px);
  j.at("pixel_pitch_mm").get_to(g.pixel_pitch_mm);
  j.at("viewing_distance_mm").get_to(g.viewing_distance_mm);
}

void to_json(json& j, const LuminanceCurve& c) {
  j = json{{"domain", "normalized_grayscale_0_1"},
           {"coefficients_cd_per_m2", c.coefficients},
           {"fit_degree", c.fit_degree},
           {"residual_rms_cd_per_m2", c.residual_rms},
           {"background_luminance_cd_per_m2", c.background_luminance},
           {"negative_prediction_warning", c.negative_prediction_warning}};
}

void from_json(const json& j, LuminanceCurve& c) {
  expect_keys(j,
              {"domain", "coefficients_cd_per_m2", "fit_degree", "residual_rms_cd_per_m2",
               "background_luminance_cd_per_m2", "negative_prediction_warning"},
              "luminance_curve");
  j.at("coefficients_cd_per_m2").get_to(c.coefficients);
  j.at("fit_degree").get_to(c.fit_degree);
  j.at("residual_rms_cd_per_m2").get_to(c.residual_rms);
  j.at("background_luminance_cd_per_m2").get_to(c.background_luminance);
  c.negative_prediction_warning = j.value("negative_prediction_warning", false);
}

void to_json(json& j, const CalibrationProfile& p) {
  j = json{{"format", "visbench.calibration"},
           {"format_version", session::kFormatVersion},
           {"id", p.id},
           {"geometry", p.geometry},
           {"luminance_curve", p.curve},
           {"min_letter_pixels", p.min_letter_pixels},
           {"min_renderable_logmar_computed", p.min_renderable_logmar_computed},
           {"brightness_setting_fraction", p.brightness_setting}};
  optional_to(j, "min_renderable_logmar_measured", p.min_renderable_logmar_measured);
  optional_to(j, "meter_precision_fraction", p.meter_precision_fraction);
}

void from_json(const json& j, CalibrationProfile& p) {
  expect_keys(j,
              {"format", "format_version", "id", "geometry", "luminance_curve", "min_letter_pixels",
               "min_renderable_logmar_computed", "min_renderable_logmar_measured",
               "brightness_setting_fraction", "meter_precision_fraction"},
              "calibration");
  if (j.contains("format_version") && j.at("format_version").get<int>() != session::kFormatVersion) {
    throw ValidationError("calibration.format_version", "unsupported calibration format version");
  }
  j.at("id").get_to(p.id);
  j.at("geometry").get_to(p.geometry);
  j.at("luminance_curve").get_to(p.curve);
  p.min_letter_pixels = j.value("min_letter_pixels", 5);
  p.min_renderable_logmar_computed = j.contains("min_renderable_logmar_computed")
                                         ? j.at("min_renderable_logmar_computed").get<double>()
                                         : min_renderable_logmar(p.geometry, p.min_letter_pixels);
  p.min_renderable_logmar_measured = optional_from<double>(j, "min_renderable_logmar_measured");
  p.brightness_setting = j.value("brightness_setting_fraction", 1.0);
  p.meter_precision_fraction = optional_from<double>(j, "meter_precision_fraction");
}

}  // namespace calibration

namespace metrics {

void to_json(json& j, const AcuityResult& r) {
  j = json{{"logmar", r.logmar},
           {"mar_arcmin", r.mar_arcmin},
           {"decimal", r.decimal},
           {"snellen_numerator", r.snellen_numerator},
           {"snellen_denominator", r.snellen_denominator},
           {"snellen", snellen_string(r)}};
}

void from_json(const json& j, AcuityResult& r) {
  j.at("logmar").get_to(r.logmar);
  j.at("mar_arcmin").get_to(r.mar_arcmin);
  j.at("decimal").get_to(r.decimal);
  j.at("snellen_numerator").get_to(r.snellen_numerator);
  j.at("snellen_denominator").get_to(r.snellen_denominator);
}

void to_json(json& j, const ContrastResult& r) {
  j = json{{"weber_threshold_magnitude", r.weber_threshold_magnitude},
           {"log_cs", r.log_cs},
           {"percent_threshold", r.percent_threshold}};
}

void from_json(const json& j, ContrastResult& r) {
  j.at("weber_threshold_magnitude").get_to(r.weber_threshold_magnitude);
  j.at("log_cs").get_to(r.log_cs);
  j.at("percent_threshold").get_to(r.percent_threshold);
}

}  // namespace metrics

namespace hue {

void to_json(json& j, const HueArrangement& a) { j = a.groups(); }

void from_json(const json& j, HueArrangement& a) {
  a = HueArrangement(j.get<std::vector<std::vector<int>>>());
}

void to_json(json& j, const TesReport& r) {
  json per_cap = json::object();
  for (const auto& [cap, error] : r.per_cap_error) per_cap[std::to_string(cap)] = error;
  j = json{{"per_cap_error", per_cap}, {"per_group_tes", r.per_group_tes}, {"total", r.total}};
}

void from_json(const json& j, TesReport& r) {
  r.per_cap_error.clear();
  for (const auto& [key, value] : j.at("per_cap_error").items()) r.per_cap_error[std::stoi(key)] = value.get<int>();
  j.at("per_group_tes").get_to(r.per_group_tes);
  j.at("total").get_to(r.total);
}

}  // namespace hue

namespace staircase {

void to_json(json& j, const StaircaseConfig& c) {
  j = json{{"easiest_level", c.easiest_level},
           {"hardest_level", c.hardest_level},
           {"termination_delta", c.termination_delta},
           {"passes_required_per_level", c.passes_required_per_level},
           {"alternatives_per_trial", c.alternatives_per_trial}};
}

void to_json(json& j, const StaircaseState& s) {
  j = json{{"config", s.config()},
           {"bracket_easy", s.bracket_easy()},
           {"bracket_hard", s.bracket_hard()},
           {"current_level", s.current_level()},
           {"consecutive_correct", s.consecutive_correct()},
           {"trials", s.trials().size()},
           {"status", s.status() == Status::Running ? "running" : "terminated"}};
  optional_to(j, "final_threshold", s.final_threshold());
}

}  // namespace staircase

namespace session {

void to_json(json& j, const LightLevel& l) {
  j = json{{"label", l.label}, {"illuminance_lux", l.illuminance_lux}};
}

void from_json(const json& j, LightLevel& l) {
  expect_keys(j, {"label", "illuminance_lux"}, "light_level");
  j.at("label").get_to(l.label);
  j.at("illuminance_lux").get_to(l.illuminance_lux);
}

void to_json(json& j, const Condition& c) {
  j = json{{"device_label", c.device_label}, {"light_level", c.light_level}};
}

void from_json(const json& j, Condition& c) {
  expect_keys(j, {"device_label", "light_level"}, "condition");
  j.at("device_label").get_to(c.device_label);
  j.at("light_level").get_to(c.light_level);
}

void to_json(json& j, const SessionOptions& o) {
  j = json{{"hue_min_seconds", o.hue_min_seconds},
           {"contrast_rule", o.contrast_rule == ContrastRule::BothLetters ? "both" : "either"},
           {"rest_between_conditions", o.rest_between_conditions}};
}

void from_json(const json& j, SessionOptions& o) {
  expect_keys(j, {"hue_min_seconds", "contrast_rule", "rest_between_conditions"}, "options");
  o.hue_min_seconds = j.value("hue_min_seconds", 480.0);
  const std::string rule = j.value("contrast_rule", std::string("both"));
  if (rule == "both") {
    o.contrast_rule = ContrastRule::BothLetters;
  } else if (rule == "either") {
    o.contrast_rule = ContrastRule::EitherLetter;
  } else {
    throw ValidationError("options.contrast_rule", "contrast_rule must be \"both\" or \"either\"");
  }
  o.rest_between_conditions = j.value("rest_between_conditions", true);
}

void to_json(json& j, const SessionPlan& p) {
  json tests = json::array();
  for (TestKind t : p.test_order) tests.push_back(std::string(to_string(t)));
  j = json{{"participant_id", p.participant_id},
           {"participant_index", p.participant_index},
           {"conditions", p.conditions},
           {"test_order", tests},
           {"seed", p.seed},
           {"calibration", p.calibration},
           {"options", p.options}};
}

void from_json(const json& j, SessionPlan& p) {
  expect_keys(j, {"participant_id", "participant_index", "conditions", "test_order", "seed", "calibration", "options"},
              "plan");
  j.at("participant_id").get_to(p.participant_id);
  j.at("participant_index").get_to(p.participant_index);
  j.at("conditions").get_to(p.conditions);
  p.test_order.clear();
  for (const auto& t : j.at("test_order")) p.test_order.push_back(test_kind_from_string(t.get<std::string>()));
  j.at("seed").get_to(p.seed);
  j.at("calibration").get_to(p.calibration);
  p.options = j.contains("options") ? j.at("options").get<SessionOptions>() : SessionOptions{};
}

void to_json(json& j, const TrialRecord& r) {
  j = json{{"sequence", r.sequence},
           {"kind", to_string(r.kind)},
           {"participant_id", r.participant_id},
           {"condition_index", r.condition_index},
           {"condition", r.condition},
           {"test", to_string(r.test)},
           {"stimulus", r.stimulus},
           {"response", r.response},
           {"wall_clock_ms", r.wall_clock_ms},
           {"monotonic_s", r.monotonic_s}};
  optional_to(j, "level", r.level);
  optional_to(j, "correct", r.correct);
}

void from_json(const json& j, TrialRecord& r) {
  expect_keys(j,
              {"sequence", "kind", "participant_id", "condition_index", "condition", "test", "level",
               "stimulus", "response", "correct", "wall_clock_ms", "monotonic_s"},
              "record");
  j.at("sequence").get_to(r.sequence);
  r.kind = record_kind_from_string(j.at("kind").get<std::string>());
  j.at("participant_id").get_to(r.participant_id);
  j.at("condition_index").get_to(r.condition_index);
  j.at("condition").get_to(r.condition);
  r.test = test_kind_from_string(j.at("test").get<std::string>());
  r.level = optional_from<double>(j, "level");
  j.at("stimulus").get_to(r.stimulus);
  j.at("response").get_to(r.response);
  r.correct = optional_from<bool>(j, "correct");
  j.at("wall_clock_ms").get_to(r.wall_clock_ms);
  j.at("monotonic_s").get_to(r.monotonic_s);
}

void to_json(json& j, const TestOutcome& o) {
  j = json{{"test", to_string(o.test)},
           {"complete", o.complete},
           {"trials", o.trials},
           {"duration_s", o.duration_s}};
  optional_to(j, "threshold_level", o.threshold_level);
  optional_to(j, "acuity", o.acuity);
  optional_to(j, "contrast", o.contrast);
  optional_to(j, "tes", o.tes);
  j["band"] = o.band ? json(std::string(metrics::to_string(*o.band))) : json(nullptr);
}

void to_json(json& j, const SessionResult& r) {
  json conditions = json::array();
  for (const auto& c : r.conditions) {
    conditions.push_back(json{{"condition", c.condition}, {"tests", c.tests}});
  }
  j = json{{"artifact_version", r.artifact_version},
           {"complete", r.complete},
           {"plan", r.plan},
           {"conditions", conditions}};
}

void to_json(json& j, const Prompt& p) {
  static constexpr const char* kinds[] = {"trial", "hue_board", "rest", "done"};
  j = json{{"kind", kinds[static_cast<int>(p.kind)]}, {"sequence", p.sequence}, {"task_index", p.task_index}};
  if (p.kind == PromptKind::Done) return;
  j["condition_index"] = p.condition_index;
  j["test"] = to_string(p.test);
  if (p.kind == PromptKind::Trial) {
    j["level"] = p.level;
    if (p.orientation) j["orientation"] = to_string(*p.orientation);
    if (p.pixel_height) j["pixel_height"] = *p.pixel_height;
    if (p.letters) j["letters"] = *p.letters;
    if (p.grayscale) j["grayscale"] = *p.grayscale;
  }
  if (p.kind == PromptKind::HueBoard) {
    j["arrangement"] = *p.arrangement;
    j["elapsed_seconds"] = p.elapsed_seconds;
    j["remaining_seconds"] = p.remaining_seconds;
  }
}

}  // namespace session
}  // namespace visbench
