#pragma once

// Display calibration: viewing geometry, grayscale -> luminance fit and
// the derived stimulus parameters (Weber contrast of a letter, optotype
// size in pixels).

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace visbench::calibration {

struct DisplayGeometry {
  int width_px = 0;
  int height_px = 0;
  double pixel_pitch_mm = 0.0;
  double viewing_distance_mm = 0.0;

  static DisplayGeometry from_ppi(int width_px, int height_px, double ppi, double viewing_distance_mm);

  void validate() const;
  bool operator==(const DisplayGeometry&) const = default;
};

struct LuminanceSample {
  double grayscale = 0.0;  // normalized [0,1]
  double luminance = 0.0;  // cd/m^2
};

/// Polynomial in normalized grayscale, coefficients in ascending degree.
struct LuminanceCurve {
  std::vector<double> coefficients;
  int fit_degree = 1;
  double residual_rms = 0.0;
  double background_luminance = 0.0;  // value at g = 1
  /// Set when the fitted polynomial dips below zero somewhere on [0,1].
  bool negative_prediction_warning = false;

  double luminance(double grayscale) const;
  bool operator==(const LuminanceCurve&) const = default;
};

inline constexpr int kDefaultFitDegree = 4;

/// Ordinary least squares. Requires at least degree+1 distinct grayscale
/// values and degree in [1, 8]; throws ValidationError otherwise, and
/// DomainError when the design matrix is rank deficient.
LuminanceCurve fit_luminance_curve(const std::vector<LuminanceSample>& samples,
                                   int degree = kDefaultFitDegree);

/// Weber contrast of a letter drawn at `grayscale` on a full-white
/// background. Negative fitted luminance is clamped to zero.
double grayscale_to_weber(double grayscale, const LuminanceCurve& curve);

/// Height in pixels of a 5x5-grid optotype whose gap subtends
/// 10^logmar arcmin. Throws DomainError if the letter does not fit on the
/// display's shorter side.
double optotype_pixel_height(double target_logmar, const DisplayGeometry& geometry);

/// logMAR of the smallest letter at least `min_letter_pixels` tall.
double min_renderable_logmar(const DisplayGeometry& geometry, int min_letter_pixels = 5);

struct CalibrationProfile {
  std::string id;
  DisplayGeometry geometry;
  LuminanceCurve curve;
  int min_letter_pixels = 5;
  double min_renderable_logmar_computed = 0.0;
  /// Empirical floor from a pilot measurement; wins over the computed value.
  std::optional<double> min_renderable_logmar_measured;
  double brightness_setting = 1.0;
  /// Relative precision of the luminance meter. Recorded only.
  std::optional<double> meter_precision_fraction;

  double effective_min_logmar() const {
    return min_renderable_logmar_measured.value_or(min_renderable_logmar_computed);
  }
  void validate() const;
  bool operator==(const CalibrationProfile&) const = default;
};

CalibrationProfile make_profile(std::string id, const DisplayGeometry& geometry,
                                const LuminanceCurve& curve, int min_letter_pixels = 5,
                                std::optional<double> measured_min_logmar = std::nullopt,
                                double brightness_setting = 1.0);

/// Smartphone reference setup: 2960x1440 at 523 PPI viewed from 1 m,
/// measured floor -0.62 logMAR, full brightness. The luminance curve is a
/// degree-4 fit to a synthetic gamma-2.2 panel (0.5 to 450 cd/m^2) and
/// must be replaced by real meter readings for actual testing.
CalibrationProfile reference_profile();

/// Two-column text: grayscale (0-1, or 0-255 when any value exceeds 1)
/// and luminance in cd/m^2. Whitespace or comma separated; '#' comments.
std::vector<LuminanceSample> load_samples(const std::filesystem::path& path);

std::string profile_to_json(const CalibrationProfile& profile);
CalibrationProfile profile_from_json(const std::string& text);
void save_profile(const CalibrationProfile& profile, const std::filesystem::path& path);
CalibrationProfile load_profile(const std::filesystem::path& path);

}  // namespace visbench::calibration
