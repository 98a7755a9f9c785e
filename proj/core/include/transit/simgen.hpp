#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "transit/calib.hpp"
#include "transit/core.hpp"
#include "transit/io.hpp"

namespace transit::simgen {

using Rng = std::mt19937_64;

struct StarProfile {
  std::string star_id;
  double baseline_flux = 1.0e4;  // physical counts per exposure and pixel
  double jitter = 1.0e-3;        // relative std of multiplicative pixel noise
  double drift_min = -2.0e-3;    // relative flux change over the whole observation
  double drift_max = 2.0e-3;
};

/// depth(i) = base + sum of Gaussian bumps over the 283-point grid. Bump
/// centres are drawn near `line_centers` (molecular-band stand-ins).
struct SpectrumModel {
  double base_min = 0.004;
  double base_max = 0.02;
  std::size_t n_bumps = 4;
  double width_min = 4.0;   // grid points
  double width_max = 14.0;
  double amp_min = 1.0e-4;
  double amp_max = 1.2e-3;
  std::vector<double> line_centers = {25.0, 70.0, 118.0, 160.0, 205.0, 250.0};
  double center_jitter = 4.0;
};

struct TimingModel {
  std::size_t n_frames = 150;  // exposures after correlated double sampling
  double t1_min = 0.26;        // ingress centre, as a fraction of n_frames
  double t1_max = 0.36;
  double t2_min = 0.64;        // egress centre
  double t2_max = 0.74;
  double ingress_min = 2.0;    // ingress/egress duration in frames
  double ingress_max = 5.0;
  double edge_margin = 0.15;   // transit never starts/ends within this fraction of the edges
};

struct DetectorModel {
  std::size_t airs_rows = 2;
  std::size_t fgs_rows = 6;
  std::size_t fgs_cols = 6;
  double fgs_flux_scale = 4.0;   // FGS counts relative to the star baseline
  double gain = 0.45;            // digital = gain * physical + offset
  double offset = 1000.0;
  double nonlinearity = 2.0e-6;  // correction polynomial y + a y^2
  double dark_level = 40.0;      // counts per read
  double flat_std = 0.02;
  double hot_fraction = 0.005;
  double hot_excess = 5.0e4;     // extra counts on hot pixels
  double read_offset = 300.0;    // scale of the per-pair shared read level
};

struct SimConfig {
  std::size_t n_planets = 100;
  std::vector<StarProfile> stars = {
      {"star_a", 1.0e4, 1.0e-3, -2.0e-3, 2.0e-3},
      {"star_b", 2.5e4, 1.5e-3, -3.0e-3, 1.0e-3},
  };
  SpectrumModel spectrum;
  TimingModel timing;
  DetectorModel detector;
  bool noise = true;
  std::uint64_t seed = 0;

  /// SimError on out-of-range or inconsistent settings.
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults.
  static SimConfig from_json(const nlohmann::json& j);
};

struct TransitTiming {
  double t1 = 0.0;       // ingress centre (frames)
  double t2 = 0.0;       // egress centre
  double duration = 0.0; // ingress/egress duration
};

/// Transit weight in [0, 1]: 0 out of transit, 1 on the flat bottom, linear in between.
double trapezoid(double t, const TransitTiming& timing);

/// AIRS column -> target index, 1 + round(w * 281 / 355). FGS maps to index 0.
std::size_t column_to_target_index(std::size_t column);

TargetSpectrum sample_spectrum(const SpectrumModel& model, Rng& rng);
TransitTiming sample_timing(const TimingModel& model, Rng& rng);

struct RenderedPlanet {
  SpectralCube airs_raw;
  SpectralCube fgs_raw;
  calib::CalibrationSet airs_calib;
  calib::CalibrationSet fgs_calib;
  SpectralCube airs_physical;  // ground-truth calibrated cube
  SpectralCube fgs_physical;
};

/// Forward instrument model. The physical flux per pixel and exposure is
///   baseline * (1 - depth(lambda(w)) * trapezoid(t)) * (1 + drift * t / T) * (1 + jitter)
/// and detector effects are applied in the reverse order of calib::calibrate:
/// flat, CDS read pairs sharing a per-pair read level, dark, non-linearity,
/// ADC gain/offset. Hot pixels get extra counts and go into the calibration mask.
RenderedPlanet render_cube(const TargetSpectrum& spectrum, const StarProfile& star, const TransitTiming& timing,
                           const DetectorModel& detector, std::size_t n_frames, Rng& rng, bool noise);

/// Writes a full dataset (manifest, cubes, calibration directories,
/// targets.csv, truth_timing.csv) to out_root.
io::DatasetManifest generate_dataset(const SimConfig& config, const std::filesystem::path& out_root);

}  // namespace transit::simgen
