#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "transit/core.hpp"
#include "transit/io.hpp"

namespace transit::scoring {

struct ScoreConfig {
  double sigma_ideal = 1e-5;  // 10 ppm in flux-ratio units
  bool clip_score = true;
  /// Optional per-wavelength weights (283 values); empty means unweighted.
  std::vector<double> wavelength_weights;

  void validate() const;
  nlohmann::json to_json() const;
  static ScoreConfig from_json(const nlohmann::json& j);
};

/// Gaussian log-likelihood of one observation: -1/2 (ln 2pi + ln sigma^2 + (y - mu)^2 / sigma^2).
double gll(double y, double mu, double sigma);

/// Double sum of gll over planets x wavelengths. Planet ids must match pairwise.
double sum_gll(std::span<const SpectrumPrediction> predictions, std::span<const TargetSpectrum> truth,
               const std::vector<double>& weights = {});

/// (L - L_ref) / (L_ideal - L_ref).
double score(double L, double L_ideal, double L_ref);
double clip_unit(double value);

struct ReferenceBaseline {
  std::vector<double> mu_ref;     // per-wavelength training mean
  std::vector<double> sigma_ref;  // per-wavelength training std (population), floored
  bool degenerate = false;        // some wavelength had zero spread

  nlohmann::json to_json() const;
  static ReferenceBaseline from_json(const nlohmann::json& j);
};

ReferenceBaseline fit_reference(std::span<const TargetSpectrum> train_targets);
double l_ideal(std::span<const TargetSpectrum> truth, const ScoreConfig& config);
double l_ref(const ReferenceBaseline& baseline, std::span<const TargetSpectrum> truth,
             const std::vector<double>& weights = {});
/// The baseline's prediction (mu_ref, sigma_ref) for every given planet.
std::vector<SpectrumPrediction> baseline_predictions(const ReferenceBaseline& baseline,
                                                     std::span<const TargetSpectrum> truth);

struct PartialScore {
  double L = 0.0;
  double L_ideal = 0.0;
  double L_ref = 0.0;
  double score = 0.0;
};

struct ScoreReport {
  int fold = -1;  // -1 when not part of a cross-validation
  double L = 0.0;
  double L_ideal = 0.0;
  double L_ref = 0.0;
  double score = 0.0;
  double score_clipped = 0.0;
  std::map<std::string, PartialScore> per_star;
  std::vector<std::pair<std::string, PartialScore>> per_planet;  // in prediction order

  nlohmann::json to_json() const;  // per-planet rows go to CSV instead
};

/// Scores predictions against truth, with L_ref from `baseline`.
ScoreReport evaluate(std::span<const SpectrumPrediction> predictions, std::span<const TargetSpectrum> truth,
                     const ReferenceBaseline& baseline, const ScoreConfig& config);

void write_per_planet_csv(const ScoreReport& report, const std::filesystem::path& path);

struct Fold {
  std::vector<std::string> train_ids;
  std::vector<std::string> validation_ids;
};

/// Star-stratified K folds: each star's planets are shuffled with the seed and
/// dealt round-robin, so every validation fold holds planets of every star.
std::vector<Fold> grouped_kfold(const std::vector<std::string>& planet_ids, const std::vector<std::string>& star_ids,
                                std::size_t k, std::uint64_t seed);
std::vector<Fold> grouped_kfold(const io::DatasetManifest& manifest, std::size_t k, std::uint64_t seed);

/// Rows follow `errors`, columns follow `sigmas`; entry = gll(0, error, sigma).
Matrix score_landscape(std::span<const double> errors, std::span<const double> sigmas);
void write_landscape_csv(const Matrix& grid, std::span<const double> errors, std::span<const double> sigmas,
                         const std::filesystem::path& path);

}  // namespace transit::scoring
