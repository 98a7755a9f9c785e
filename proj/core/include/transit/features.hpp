#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "transit/core.hpp"
#include "transit/curves.hpp"
#include "transit/detrend.hpp"

namespace transit::features {

// Feature kinds computed per (signal, zone). "depth" is per signal and ignores zones.
inline const std::vector<std::string> kKnownKinds = {"min", "max", "mean", "std", "poly3", "poly4", "depth"};

/// Declarative description of which features to extract. Kinds are emitted
/// in kKnownKinds order regardless of the order given here.
struct FeatureSchema {
  std::vector<std::string> kinds = kKnownKinds;
  std::vector<detrend::Zone> zones = {detrend::Zone::Ingress, detrend::Zone::Egress};

  void validate() const;
  bool has(const std::string& kind) const;
  /// Number of features produced for one signal.
  std::size_t per_signal() const;
  nlohmann::json to_json() const;
  static FeatureSchema from_json(const nlohmann::json& j);

  /// Every kind on ingress and egress: 27 features per signal.
  static FeatureSchema full();
  /// depth plus ingress/egress mean and std: 5 features per signal.
  static FeatureSchema minimal();
};

struct FeatureRow {
  std::vector<std::string> names;
  std::vector<double> values;
};

/// Features of every signal in the set (fgs, airs_mean, airs_bin_*), all read
/// against one shared segmentation. Names look like "airs_bin_03.egress.poly4_c2".
FeatureRow extract_features(const curves::LightCurveSet& curves, const detrend::TransitSegmentation& seg,
                            const FeatureSchema& schema);

/// Least-squares polynomial coefficients (ascending powers) of the samples
/// against local time rescaled to [0, 1].
std::vector<double> fit_polynomial(std::span<const double> samples, std::size_t degree);

struct FeatureMatrix {
  Matrix values;  // planets x features
  std::vector<std::string> names;
  std::vector<std::string> planet_ids;

  void validate() const;
};

FeatureMatrix assemble(const std::vector<std::string>& planet_ids, const std::vector<FeatureRow>& rows);

void write_features_csv(const FeatureMatrix& features, const std::filesystem::path& path);
FeatureMatrix read_features_csv(const std::filesystem::path& path);

/// Per-column standardization with population standard deviation.
struct StandardScaler {
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<std::string> names;
  std::vector<std::size_t> guarded;  // columns whose std was replaced by 1
  bool fitted = false;

  nlohmann::json to_json() const;
  static StandardScaler from_json(const nlohmann::json& j);
};

inline constexpr double kMinScale = 1e-12;

StandardScaler fit_scaler(const Matrix& matrix, std::vector<std::string> names = {});
Matrix transform(const StandardScaler& scaler, const Matrix& matrix);
Matrix inverse_transform(const StandardScaler& scaler, const Matrix& matrix);

struct MuSigma {
  Matrix mu;
  Matrix sigma;
};

/// mu = mu_z * std + mean; sigma = sigma_z * std. No flooring happens here.
MuSigma inverse_transform_mu_sigma(const StandardScaler& scaler, const Matrix& mu_z, const Matrix& sigma_z);

}  // namespace transit::features
