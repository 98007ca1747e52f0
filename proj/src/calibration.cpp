#include "visbench/calibration.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "visbench/errors.hpp"
#include "visbench/metrics.hpp"
#include "visbench/serialization.hpp"

namespace visbench::calibration {

DisplayGeometry DisplayGeometry::from_ppi(int width_px, int height_px, double ppi,
                                          double viewing_distance_mm) {
  if (!(ppi > 0.0)) throw ValidationError("ppi", "pixels per inch must be positive");
  return DisplayGeometry{width_px, height_px, 25.4 / ppi, viewing_distance_mm};
}

void DisplayGeometry::validate() const {
  if (width_px <= 0 || height_px <= 0) throw ValidationError("resolution", "resolution must be positive");
  if (!(pixel_pitch_mm > 0.0) || !std::isfinite(pixel_pitch_mm)) {
    throw ValidationError("pixel_pitch_mm", "pixel pitch must be positive");
  }
  if (!(viewing_distance_mm > 0.0) || !std::isfinite(viewing_distance_mm)) {
    throw ValidationError("viewing_distance_mm", "viewing distance must be positive");
  }
}

double LuminanceCurve::luminance(double grayscale) const {
  double value = 0.0;
  for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) {
    value = value * grayscale + *it;
  }
  return value;
}

LuminanceCurve fit_luminance_curve(const std::vector<LuminanceSample>& samples, int degree) {
  if (degree < 1 || degree > 8) throw ValidationError("degree", "fit degree must lie in [1, 8]");
  if (static_cast<int>(samples.size()) < degree + 1) {
    throw ValidationError("samples", "a degree-" + std::to_string(degree) + " fit needs at least " +
                                         std::to_string(degree + 1) + " samples");
  }
  std::set<double> distinct;
  for (const auto& s : samples) {
    if (!(s.grayscale >= 0.0 && s.grayscale <= 1.0)) {
      throw ValidationError("samples", "grayscale values must be normalized to [0,1]");
    }
    if (!std::isfinite(s.luminance)) throw ValidationError("samples", "luminance must be finite");
    distinct.insert(s.grayscale);
  }
  if (static_cast<int>(distinct.size()) < degree + 1) {
    throw ValidationError("samples", "grayscale values must be distinct");
  }

  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd design(n, degree + 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double p = 1.0;
    for (int d = 0; d <= degree; ++d) {
      design(i, d) = p;
      p *= samples[static_cast<std::size_t>(i)].grayscale;
    }
    y(i) = samples[static_cast<std::size_t>(i)].luminance;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < degree + 1) {
    throw DomainError("luminance fit design matrix is rank deficient");
  }
  const Eigen::VectorXd beta = qr.solve(y);

  LuminanceCurve curve;
  curve.fit_degree = degree;
  curve.coefficients.assign(beta.data(), beta.data() + beta.size());
  const Eigen::VectorXd residual = design * beta - y;
  curve.residual_rms = std::sqrt(residual.squaredNorm() / static_cast<double>(n));
  curve.background_luminance = curve.luminance(1.0);
  constexpr int kChecks = 1000;
  for (int i = 0; i <= kChecks; ++i) {
    if (curve.luminance(static_cast<double>(i) / kChecks) < 0.0) {
      curve.negative_prediction_warning = true;
      break;
    }
  }
  if (!(curve.background_luminance > 0.0)) {
    throw DomainError("fitted background luminance (grayscale 1) must be positive");
  }
  return curve;
}

double grayscale_to_weber(double grayscale, const LuminanceCurve& curve) {
  if (!(grayscale >= 0.0 && grayscale <= 1.0)) throw DomainError("grayscale must lie in [0,1]");
  const double target = std::max(0.0, curve.luminance(grayscale));
  return metrics::weber_contrast(target, curve.background_luminance);
}

double optotype_pixel_height(double target_logmar, const DisplayGeometry& geometry) {
  geometry.validate();
  const double gap_arcmin = std::pow(10.0, target_logmar);
  const auto letter = metrics::VisualAngle::from_arcmin(5.0 * gap_arcmin);
  const double height_mm = metrics::object_size_for_angle(letter, geometry.viewing_distance_mm);
  const double pixels = height_mm / geometry.pixel_pitch_mm;
  if (pixels > std::min(geometry.width_px, geometry.height_px)) {
    throw DomainError("optotype of " + std::to_string(pixels) + " px exceeds the display extent");
  }
  return pixels;
}

double min_renderable_logmar(const DisplayGeometry& geometry, int min_letter_pixels) {
  geometry.validate();
  if (min_letter_pixels < 5) {
    throw ValidationError("min_letter_pixels", "a 5x5 optotype needs at least 5 pixels");
  }
  const double height_mm = min_letter_pixels * geometry.pixel_pitch_mm;
  const auto letter = metrics::visual_angle(height_mm, geometry.viewing_distance_mm);
  return std::log10(letter.arcmin() / 5.0);
}

void CalibrationProfile::validate() const {
  if (id.empty()) throw ValidationError("id", "calibration id must be non-empty");
  geometry.validate();
  if (curve.coefficients.empty()) throw ValidationError("curve", "luminance curve has no coefficients");
  if (!(curve.background_luminance > 0.0)) {
    throw ValidationError("curve", "background luminance must be positive");
  }
  if (!std::isfinite(effective_min_logmar())) {
    throw ValidationError("min_renderable_logmar", "minimum renderable logMAR must be finite");
  }
}

CalibrationProfile make_profile(std::string id, const DisplayGeometry& geometry,
                                const LuminanceCurve& curve, int min_letter_pixels,
                                std::optional<double> measured_min_logmar, double brightness_setting) {
  CalibrationProfile p;
  p.id = std::move(id);
  p.geometry = geometry;
  p.curve = curve;
  p.min_letter_pixels = min_letter_pixels;
  p.min_renderable_logmar_computed = min_renderable_logmar(geometry, min_letter_pixels);
  p.min_renderable_logmar_measured = measured_min_logmar;
  p.brightness_setting = brightness_setting;
  p.validate();
  return p;
}

CalibrationProfile reference_profile() {
  std::vector<LuminanceSample> samples;
  for (int i = 0; i <= 16; ++i) {
    const double g = i / 16.0;
    samples.push_back({g, 0.5 + 449.5 * std::pow(g, 2.2)});
  }
  auto profile = make_profile("reference-phone-1m", DisplayGeometry::from_ppi(1440, 2960, 523.0, 1000.0),
                              fit_luminance_curve(samples), 5, -0.62, 1.0);
  profile.meter_precision_fraction = 0.08;
  return profile;
}

std::vector<LuminanceSample> load_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open luminance sample file: " + path.string());
  std::vector<LuminanceSample> samples;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    LuminanceSample s;
    if (!(row >> s.grayscale)) {
      std::istringstream probe(line);
      std::string token;
      if (probe >> token && samples.empty()) continue;  // header row
      if (!token.empty()) {
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected `grayscale luminance`");
      }
      continue;
    }
    if (!(row >> s.luminance)) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected `grayscale luminance`");
    }
    samples.push_back(s);
  }
  const bool eight_bit = std::any_of(samples.begin(), samples.end(),
                                     [](const LuminanceSample& s) { return s.grayscale > 1.0; });
  if (eight_bit) {
    for (auto& s : samples) s.grayscale /= 255.0;
  }
  return samples;
}

std::string profile_to_json(const CalibrationProfile& profile) {
  nlohmann::json j = profile;
  return j.dump(2) + "\n";
}

CalibrationProfile profile_from_json(const std::string& text) {
  try {
    auto profile = nlohmann::json::parse(text).get<CalibrationProfile>();
    profile.validate();
    return profile;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("calibration", std::string("malformed calibration profile: ") + e.what());
  }
}

void save_profile(const CalibrationProfile& profile, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write calibration profile: " + path.string());
  out << profile_to_json(profile);
  if (!out) throw IoError("write failed: " + path.string());
}

CalibrationProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open calibration profile: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return profile_from_json(buffer.str());
}

}  // namespace visbench::calibration
