#pragma once

// Acuity, contrast and color-vision score conversions.
//
// All functions are pure. Inputs outside an operation's domain raise
// visbench::DomainError.

#include <span>
#include <string>
#include <string_view>

namespace visbench::metrics {

/// Angle subtended at the eye. Construct through the factories so that
/// `arcmin == degrees * 60` holds exactly.
class VisualAngle {
 public:
  static VisualAngle from_degrees(double degrees);
  static VisualAngle from_arcmin(double arcmin);

  double degrees() const noexcept { return degrees_; }
  double arcmin() const noexcept { return arcmin_; }

 private:
  VisualAngle(double degrees, double arcmin) : degrees_(degrees), arcmin_(arcmin) {}
  double degrees_;
  double arcmin_;
};

/// Angle subtended by an object of `object_size_mm` seen from `object_distance_mm`.
VisualAngle visual_angle(double object_size_mm, double object_distance_mm);

/// Physical size that subtends `angle` at `object_distance_mm` (inverse of visual_angle).
double object_size_for_angle(VisualAngle angle, double object_distance_mm);

inline constexpr int kSnellenNumerator = 20;

/// One acuity threshold in all four notations.
struct AcuityResult {
  double logmar = 0.0;
  double mar_arcmin = 1.0;
  double decimal = 1.0;
  int snellen_numerator = kSnellenNumerator;
  double snellen_denominator = 20.0;

  bool operator==(const AcuityResult&) const = default;
};

/// MAR equals the gap angle in arcminutes.
AcuityResult acuity_from_gap_angle(VisualAngle gap);

/// Convenience for staircases that run directly in logMAR units.
AcuityResult acuity_from_logmar(double logmar);

/// "20/40" style rendering. The denominator is rounded to the nearest
/// integer for display only; `metric` switches to a 6/x fraction.
std::string snellen_string(const AcuityResult& result, bool metric = false);

/// Signed Weber contrast. Dark targets on a light background are negative.
double weber_contrast(double l_target, double l_background);

double michelson_contrast(double l_max, double l_min);

/// Population standard deviation of the intensities.
double rms_contrast(std::span<const double> pixel_intensities);

struct ContrastResult {
  double weber_threshold_magnitude = 1.0;
  double log_cs = 0.0;
  double percent_threshold = 100.0;

  bool operator==(const ContrastResult&) const = default;
};

/// Takes the magnitude of a signed Weber threshold; requires 0 < |t| <= 1.
ContrastResult contrast_result_from_threshold(double weber_threshold);

enum class PerceptionBand {
  AcuityNormal,
  AcuityBelowNormal,
  CsNormal,
  CsImpairment,
  CsDisability,
  TesSuperior,
  TesAverage,
  TesLow,
};

std::string_view to_string(PerceptionBand band);

/// logMAR <= 0 is normal, anything above is below normal.
PerceptionBand classify_acuity(double logmar);

/// logCS >= 1.5 normal; [1.0, 1.5) impairment; < 1.0 disability.
PerceptionBand classify_cs(double log_cs);

/// TES in [0, 16] superior (16 included); (16, 100] average (100 included);
/// above 100 low. Negative scores are not produced by hue scoring but
/// classify as superior.
PerceptionBand classify_tes(double tes);

}  // namespace visbench::metrics
