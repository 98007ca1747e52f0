#include "visbench/metrics.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "visbench/errors.hpp"

namespace visbench::metrics {
namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw DomainError(std::string(what) + " must be finite");
  }
}

}  // namespace

VisualAngle VisualAngle::from_degrees(double degrees) {
  require_finite(degrees, "visual angle");
  if (degrees < 0.0 || degrees >= 180.0) {
    throw DomainError("visual angle must lie in [0, 180) degrees");
  }
  return VisualAngle(degrees, degrees * 60.0);
}

VisualAngle VisualAngle::from_arcmin(double arcmin) {
  return from_degrees(arcmin / 60.0);
}

VisualAngle visual_angle(double object_size_mm, double object_distance_mm) {
  require_finite(object_size_mm, "object size");
  require_finite(object_distance_mm, "object distance");
  if (object_distance_mm <= 0.0) {
    throw DomainError("object distance must be positive");
  }
  if (object_size_mm < 0.0) {
    throw DomainError("object size must be non-negative");
  }
  const double radians = 2.0 * std::atan((object_size_mm / 2.0) / object_distance_mm);
  return VisualAngle::from_degrees(radians * kRadToDeg);
}

double object_size_for_angle(VisualAngle angle, double object_distance_mm) {
  require_finite(object_distance_mm, "object distance");
  if (object_distance_mm <= 0.0) {
    throw DomainError("object distance must be positive");
  }
  const double half_radians = angle.degrees() / kRadToDeg / 2.0;
  return 2.0 * object_distance_mm * std::tan(half_radians);
}

AcuityResult acuity_from_gap_angle(VisualAngle gap) {
  if (!(gap.arcmin() > 0.0)) {
    throw DomainError("gap angle must be positive");
  }
  AcuityResult r;
  r.mar_arcmin = gap.arcmin();
  r.decimal = 1.0 / r.mar_arcmin;
  r.logmar = std::log10(r.mar_arcmin);
  r.snellen_numerator = kSnellenNumerator;
  r.snellen_denominator = kSnellenNumerator / r.decimal;
  return r;
}

AcuityResult acuity_from_logmar(double logmar) {
  require_finite(logmar, "logMAR");
  AcuityResult r;
  r.mar_arcmin = std::pow(10.0, logmar);
  r.decimal = 1.0 / r.mar_arcmin;
  r.logmar = std::log10(r.mar_arcmin);
  r.snellen_numerator = kSnellenNumerator;
  r.snellen_denominator = kSnellenNumerator / r.decimal;
  return r;
}

std::string snellen_string(const AcuityResult& result, bool metric) {
  std::ostringstream out;
  if (metric) {
    out << "6/" << std::llround(6.0 / result.decimal);
  } else {
    out << result.snellen_numerator << '/' << std::llround(result.snellen_denominator);
  }
  return out.str();
}

double weber_contrast(double l_target, double l_background) {
  require_finite(l_target, "target luminance");
  require_finite(l_background, "background luminance");
  if (l_background <= 0.0) {
    throw DomainError("background luminance must be positive");
  }
  if (l_target < 0.0) {
    throw DomainError("target luminance must be non-negative");
  }
  return (l_target - l_background) / l_background;
}

double michelson_contrast(double l_max, double l_min) {
  require_finite(l_max, "maximum luminance");
  require_finite(l_min, "minimum luminance");
  if (l_min < 0.0 || l_max < l_min) {
    throw DomainError("michelson contrast requires l_max >= l_min >= 0");
  }
  if (l_max + l_min <= 0.0) {
    throw DomainError("michelson contrast undefined for zero luminance");
  }
  return (l_max - l_min) / (l_max + l_min);
}

double rms_contrast(std::span<const double> pixel_intensities) {
  if (pixel_intensities.empty()) {
    throw DomainError("rms contrast of an empty image");
  }
  double mean = 0.0;
  for (double v : pixel_intensities) {
    require_finite(v, "pixel intensity");
    mean += v;
  }
  mean /= static_cast<double>(pixel_intensities.size());
  double ss = 0.0;
  for (double v : pixel_intensities) {
    ss += (v - mean) * (v - mean);
  }
  return std::sqrt(ss / static_cast<double>(pixel_intensities.size()));
}

ContrastResult contrast_result_from_threshold(double weber_threshold) {
  require_finite(weber_threshold, "contrast threshold");
  const double magnitude = std::abs(weber_threshold);
  if (magnitude == 0.0) {
    throw DomainError("zero contrast threshold gives unbounded sensitivity");
  }
  if (magnitude > 1.0) {
    throw DomainError("contrast threshold magnitude must not exceed 1");
  }
  ContrastResult r;
  r.weber_threshold_magnitude = magnitude;
  r.log_cs = std::log10(1.0 / magnitude);
  r.percent_threshold = magnitude * 100.0;
  return r;
}

std::string_view to_string(PerceptionBand band) {
  switch (band) {
    case PerceptionBand::AcuityNormal: return "acuity_normal";
    case PerceptionBand::AcuityBelowNormal: return "acuity_below_normal";
    case PerceptionBand::CsNormal: return "cs_normal";
    case PerceptionBand::CsImpairment: return "cs_impairment";
    case PerceptionBand::CsDisability: return "cs_disability";
    case PerceptionBand::TesSuperior: return "tes_superior";
    case PerceptionBand::TesAverage: return "tes_average";
    case PerceptionBand::TesLow: return "tes_low";
  }
  return "unknown";
}

PerceptionBand classify_acuity(double logmar) {
  require_finite(logmar, "logMAR");
  return logmar <= 0.0 ? PerceptionBand::AcuityNormal : PerceptionBand::AcuityBelowNormal;
}

PerceptionBand classify_cs(double log_cs) {
  require_finite(log_cs, "logCS");
  if (log_cs >= 1.5) return PerceptionBand::CsNormal;
  if (log_cs >= 1.0) return PerceptionBand::CsImpairment;
  return PerceptionBand::CsDisability;
}

PerceptionBand classify_tes(double tes) {
  require_finite(tes, "TES");
  if (tes <= 16.0) return PerceptionBand::TesSuperior;
  if (tes <= 100.0) return PerceptionBand::TesAverage;
  return PerceptionBand::TesLow;
}

}  // namespace visbench::metrics
