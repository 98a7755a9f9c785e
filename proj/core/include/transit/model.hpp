#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "transit/core.hpp"
#include "transit/features.hpp"

namespace transit::model {

/// Polynomial-kernel ridge settings. Defaults are the final configuration:
/// alpha = gamma = 1e-4, cubic kernel, 50 bagged members at 80% sampling.
struct RidgeConfig {
  double alpha = 1e-4;
  double gamma = 1e-4;
  int degree = 3;
  double coef0 = 1.0;
  std::size_t n_models = 50;
  double sample_fraction = 0.8;
  std::uint64_t base_seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static RidgeConfig from_json(const nlohmann::json& j);
};

/// K[i, j] = (gamma * <x_i, z_j> + coef0)^degree.
Matrix kernel(const Matrix& X, const Matrix& Z, const RidgeConfig& config);

/// One kernel ridge regressor in dual form.
struct RidgeMember {
  Matrix train_inputs;  // n x d
  Matrix dual_coef;     // n x outputs

  Matrix predict(const Matrix& X, const RidgeConfig& config) const;
};

/// Solves (K(X, X) + alpha I) A = Y with a Cholesky factorization.
RidgeMember fit_member(const Matrix& X, const Matrix& Y, const RidgeConfig& config);

/// Row indices drawn with replacement for member `index`; seeded with base_seed + index.
std::vector<std::size_t> bootstrap_rows(std::size_t n, const RidgeConfig& config, std::size_t index);

/// Members fitted on bootstrap samples of already-scaled data.
std::vector<RidgeMember> fit_members(const Matrix& X, const Matrix& Y, const RidgeConfig& config);

enum class Uncertainty {
  Ensemble,  // sample standard deviation across members
  Fixed,     // one constant sigma estimated on a holdout split
};

struct BaggedModel {
  RidgeConfig config;
  Uncertainty uncertainty = Uncertainty::Ensemble;
  double fixed_sigma = 0.0;  // flux-ratio units, used when uncertainty == Fixed
  std::vector<std::string> feature_names;
  features::StandardScaler feature_scaler;
  std::optional<features::StandardScaler> target_scaler;
  std::vector<RidgeMember> members;
};

struct FitOptions {
  bool scale_targets = true;
  Uncertainty uncertainty = Uncertainty::Ensemble;
  double holdout_fraction = 0.2;  // only used for Fixed uncertainty
};

/// Standardizes features (and optionally targets), then fits the bag. With
/// Fixed uncertainty a single member is fitted on all rows and sigma is the
/// RMS holdout error of a probe member trained on the remaining rows.
BaggedModel fit_bagged(const features::FeatureMatrix& X, const Matrix& Y, const RidgeConfig& config,
                       const FitOptions& options = {});

/// Per-member predictions in original target units (members x planets x outputs).
std::vector<Matrix> member_predictions(const BaggedModel& model, const features::FeatureMatrix& X);

/// mu = member mean; sigma = member sample std (divisor n-1), scaled back to
/// target units and floored at kSigmaFloor.
std::vector<SpectrumPrediction> predict(const BaggedModel& model, const features::FeatureMatrix& X);

/// Directory with config.json and per-member blobs in the cube array format.
void save_model(const BaggedModel& model, const std::filesystem::path& dir);
BaggedModel load_model(const std::filesystem::path& dir);

}  // namespace transit::model
