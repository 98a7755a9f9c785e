#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "transit/calib.hpp"
#include "transit/curves.hpp"
#include "transit/detrend.hpp"
#include "transit/features.hpp"
#include "transit/io.hpp"
#include "transit/model.hpp"
#include "transit/scoring.hpp"

namespace transit::pipeline {

/// Full processing and modelling configuration. Named presets iter1..iter7
/// follow the modelling iterations: calibration always on, bins 0/5/8/8/8/8/10,
/// geometric correction only in iter5, target scaling everywhere except iter1
/// and iter3, ensemble uncertainty in iter6 and iter7.
struct PipelineConfig {
  std::string preset = "custom";
  std::size_t n_bins = 10;  // 0 = fgs + airs_mean only
  bool geometric_correction = false;
  bool target_scaling = true;
  bool ensemble_uncertainty = true;
  features::FeatureSchema schema = features::FeatureSchema::full();
  model::RidgeConfig ridge;
  scoring::ScoreConfig score;
  calib::CalibConfig calibration;
  std::size_t smooth_window = detrend::kDefaultSmoothWindow;
  std::size_t guard = 0;  // 0 = default_guard(T)
  std::size_t k = 4;
  std::uint64_t seed = 0;

  void validate() const;
  /// Feature columns produced per planet.
  std::size_t feature_count() const;
  nlohmann::json to_json() const;
  /// Processing and model settings equal; the name and run settings (k, seed) are ignored.
  bool same_settings(const PipelineConfig& other) const;
  /// Starts from the preset named in "preset" (if any), then applies the remaining keys.
  static PipelineConfig from_json(const nlohmann::json& j);
};

std::vector<std::string> preset_names();
/// ConfigError for unknown names.
PipelineConfig preset(const std::string& name);

struct ProcessedPlanet {
  curves::LightCurveSet curves;  // renormalized, optionally geometrically corrected
  detrend::TransitSegmentation segmentation;
  features::FeatureRow features;
};

/// Calibrates (unless already calibrated), extracts and bins curves, segments
/// on airs_mean, renormalizes on the left/right zones, optionally applies the
/// geometric correction, then extracts features.
ProcessedPlanet process_planet(const io::DatasetManifest& manifest, const io::PlanetEntry& planet,
                               const PipelineConfig& config);

/// Feature matrix over every planet of the manifest, rows in planet-id order.
features::FeatureMatrix extract_dataset_features(const io::DatasetManifest& manifest, const PipelineConfig& config);

/// Writes a calibrated copy of the dataset (no calibration directories).
io::DatasetManifest calibrate_dataset(const io::DatasetManifest& manifest, const std::filesystem::path& out_root,
                                      const calib::CalibConfig& config);

/// Targets in the row order of `features`; DataError if one is missing.
Matrix target_matrix(const features::FeatureMatrix& features, const std::vector<TargetSpectrum>& targets);

model::BaggedModel train(const features::FeatureMatrix& features, const std::vector<TargetSpectrum>& targets,
                         const PipelineConfig& config);

features::FeatureMatrix take_planets(const features::FeatureMatrix& features, const std::vector<std::string>& ids);

struct CrossValidation {
  std::vector<scoring::ScoreReport> folds;
  double macro_score = 0.0;
  double macro_score_clipped = 0.0;
  std::vector<SpectrumPrediction> predictions;  // out-of-fold, planet-id order
  std::vector<TargetSpectrum> truth;            // same order

  nlohmann::json to_json() const;
};

/// Star-grouped K-fold: per fold, scalers, reference baseline and model are
/// fitted on the training split only; the macro score is the unweighted mean
/// of the fold scores.
CrossValidation cross_validate(const io::DatasetManifest& manifest, const features::FeatureMatrix& features,
                               const PipelineConfig& config);
CrossValidation cross_validate(const io::DatasetManifest& manifest, const PipelineConfig& config);

}  // namespace transit::pipeline
