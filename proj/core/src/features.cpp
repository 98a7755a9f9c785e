#include "transit/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "transit/io.hpp"

namespace transit::features {

using detrend::Zone;
using nlohmann::json;

void FeatureSchema::validate() const {
  if (kinds.empty()) throw ConfigError("feature schema has no kinds");
  std::set<std::string> seen;
  for (const auto& k : kinds) {
    if (std::find(kKnownKinds.begin(), kKnownKinds.end(), k) == kKnownKinds.end()) {
      throw ConfigError("unknown feature kind '" + k + "'");
    }
    if (!seen.insert(k).second) throw ConfigError("feature kind '" + k + "' listed twice");
  }
  std::set<Zone> zone_seen;
  for (Zone z : zones) {
    if (!zone_seen.insert(z).second) throw ConfigError("zone listed twice in feature schema");
  }
  const bool zone_kinds = std::any_of(kinds.begin(), kinds.end(), [](const auto& k) { return k != "depth"; });
  if (zone_kinds && zones.empty()) throw ConfigError("feature schema needs at least one zone");
}

bool FeatureSchema::has(const std::string& kind) const {
  return std::find(kinds.begin(), kinds.end(), kind) != kinds.end();
}

std::size_t FeatureSchema::per_signal() const {
  std::size_t per_zone = 0;
  for (const char* k : {"min", "max", "mean", "std"}) per_zone += has(k) ? 1 : 0;
  if (has("poly3")) per_zone += 4;
  if (has("poly4")) per_zone += 5;
  return per_zone * zones.size() + (has("depth") ? 1 : 0);
}

json FeatureSchema::to_json() const {
  json z = json::array();
  for (Zone zone : zones) z.push_back(std::string(detrend::to_string(zone)));
  return {{"kinds", kinds}, {"zones", z}};
}

FeatureSchema FeatureSchema::from_json(const json& j) {
  FeatureSchema s;
  s.kinds = j.at("kinds").get<std::vector<std::string>>();
  s.zones.clear();
  for (const auto& z : j.at("zones")) s.zones.push_back(detrend::zone_from_string(z.get<std::string>()));
  s.validate();
  return s;
}

FeatureSchema FeatureSchema::full() { return FeatureSchema{}; }

FeatureSchema FeatureSchema::minimal() {
  FeatureSchema s;
  s.kinds = {"mean", "std", "depth"};
  return s;
}

std::vector<double> fit_polynomial(std::span<const double> samples, std::size_t degree) {
  const std::size_t n = samples.size();
  if (n < degree + 2) {
    throw FeatureError("zone of " + std::to_string(n) + " samples is too short for a degree-" +
                       std::to_string(degree) + " fit");
  }
  Matrix vander(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(degree + 1));
  Vector y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double tau = static_cast<double>(i) / static_cast<double>(n - 1);
    double p = 1.0;
    for (std::size_t k = 0; k <= degree; ++k) {
      vander(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = p;
      p *= tau;
    }
    y(static_cast<Eigen::Index>(i)) = samples[i];
  }
  const Vector coef = vander.colPivHouseholderQr().solve(y);
  return {coef.data(), coef.data() + coef.size()};
}

namespace {

struct ZoneStats {
  double min, max, mean, std;
};

ZoneStats zone_stats(std::span<const double> x) {
  ZoneStats s{x[0], x[0], 0.0, 0.0};
  for (double v : x) {
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
    s.mean += v;
  }
  s.mean /= static_cast<double>(x.size());
  for (double v : x) s.std += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(x.size()));
  return s;
}

void append_signal(const LightCurve& curve, const detrend::TransitSegmentation& seg,
                   const FeatureSchema& schema, FeatureRow& row) {
  if (curve.size() != seg.length) {
    throw FeatureError(curve.label + ": curve length does not match the shared segmentation");
  }
  auto push = [&](std::string name, double value) {
    if (!std::isfinite(value)) throw FeatureError("non-finite feature " + name);
    row.names.push_back(std::move(name));
    row.values.push_back(value);
  };
  for (Zone z : schema.zones) {
    const IndexRange r = seg.zone(z);
    if (r.empty()) throw FeatureError(curve.label + ": empty zone");
    const std::span<const double> x(curve.flux.data() + r.begin, r.size());
    const std::string prefix = curve.label + "." + std::string(detrend::to_string(z)) + ".";
    const ZoneStats st = zone_stats(x);
    if (schema.has("min")) push(prefix + "min", st.min);
    if (schema.has("max")) push(prefix + "max", st.max);
    if (schema.has("mean")) push(prefix + "mean", st.mean);
    if (schema.has("std")) push(prefix + "std", st.std);
    for (std::size_t degree : {3u, 4u}) {
      if (!schema.has("poly" + std::to_string(degree))) continue;
      const auto coef = fit_polynomial(x, degree);
      for (std::size_t k = 0; k < coef.size(); ++k) {
        push(prefix + "poly" + std::to_string(degree) + "_c" + std::to_string(k), coef[k]);
      }
    }
  }
  if (schema.has("depth")) push(curve.label + ".depth", detrend::transit_depth(curve, seg));
}

}  // namespace

FeatureRow extract_features(const curves::LightCurveSet& curves, const detrend::TransitSegmentation& seg,
                            const FeatureSchema& schema) {
  schema.validate();
  FeatureRow row;
  for (const LightCurve* signal : curves.signals()) append_signal(*signal, seg, schema, row);
  return row;
}

void FeatureMatrix::validate() const {
  if (static_cast<std::size_t>(values.rows()) != planet_ids.size() ||
      static_cast<std::size_t>(values.cols()) != names.size()) {
    throw FeatureError("feature matrix shape does not match its labels");
  }
  if (!values.allFinite()) throw FeatureError("feature matrix contains non-finite values");
  std::set<std::string> unique(names.begin(), names.end());
  if (unique.size() != names.size()) throw FeatureError("duplicate feature names");
}

FeatureMatrix assemble(const std::vector<std::string>& planet_ids, const std::vector<FeatureRow>& rows) {
  if (planet_ids.size() != rows.size()) throw FeatureError("one feature row per planet is required");
  FeatureMatrix m;
  m.planet_ids = planet_ids;
  if (rows.empty()) return m;
  m.names = rows.front().names;
  m.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m.names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].names != m.names) {
      throw FeatureError("planet " + planet_ids[i] + " has a different feature layout");
    }
    for (std::size_t j = 0; j < m.names.size(); ++j) {
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i].values[j];
    }
  }
  m.validate();
  return m;
}

void write_features_csv(const FeatureMatrix& f, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "planet_id";
  for (const auto& n : f.names) out << ',' << n;
  out << '\n';
  for (Eigen::Index i = 0; i < f.values.rows(); ++i) {
    out << f.planet_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < f.values.cols(); ++j) out << ',' << io::format_double(f.values(i, j));
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

FeatureMatrix read_features_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("missing features file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
  auto header = io::split_csv_line(line);
  if (header.empty() || header[0] != "planet_id") throw FormatError(path.string() + ": bad header");
  FeatureMatrix f;
  f.names.assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = io::split_csv_line(line);
    if (cells.size() != header.size()) throw FormatError(path.string() + ": ragged row");
    f.planet_ids.push_back(cells[0]);
    std::vector<double> r;
    for (std::size_t j = 1; j < cells.size(); ++j) r.push_back(io::parse_double(cells[j]));
    rows.push_back(std::move(r));
  }
  f.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(f.names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < f.names.size(); ++j) {
      f.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  f.validate();
  return f;
}

json StandardScaler::to_json() const {
  return {{"mean", mean}, {"std", std}, {"names", names}, {"guarded", guarded}};
}

StandardScaler StandardScaler::from_json(const json& j) {
  StandardScaler s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.std = j.at("std").get<std::vector<double>>();
  s.names = j.value("names", std::vector<std::string>{});
  s.guarded = j.value("guarded", std::vector<std::size_t>{});
  if (s.mean.size() != s.std.size()) throw FormatError("scaler mean/std length mismatch");
  for (double v : s.std) {
    if (!(v > 0.0)) throw FormatError("scaler std must be positive");
  }
  s.fitted = true;
  return s;
}

StandardScaler fit_scaler(const Matrix& matrix, std::vector<std::string> names) {
  if (matrix.rows() < 2 || matrix.cols() < 1) {
    throw FeatureError("fit_scaler needs at least 2 rows and 1 column");
  }
  if (!names.empty() && names.size() != static_cast<std::size_t>(matrix.cols())) {
    throw FeatureError("fit_scaler: name count does not match columns");
  }
  StandardScaler s;
  s.names = std::move(names);
  const double n = static_cast<double>(matrix.rows());
  for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
    const double mean = matrix.col(j).sum() / n;
    const double var = (matrix.col(j).array() - mean).square().sum() / n;
    double sd = std::sqrt(var);
    if (sd < kMinScale) {
      sd = 1.0;
      s.guarded.push_back(static_cast<std::size_t>(j));
    }
    s.mean.push_back(mean);
    s.std.push_back(sd);
  }
  s.fitted = true;
  return s;
}

namespace {

void check_columns(const StandardScaler& s, Eigen::Index cols) {
  if (!s.fitted) throw FeatureError("scaler is not fitted");
  if (static_cast<std::size_t>(cols) != s.mean.size()) {
    throw FeatureError("column count " + std::to_string(cols) + " does not match scaler width " +
                       std::to_string(s.mean.size()));
  }
}

}  // namespace

Matrix transform(const StandardScaler& s, const Matrix& matrix) {
  check_columns(s, matrix.cols());
  Matrix out = matrix;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const auto k = static_cast<std::size_t>(j);
    out.col(j) = (out.col(j).array() - s.mean[k]) / s.std[k];
  }
  return out;
}

Matrix inverse_transform(const StandardScaler& s, const Matrix& matrix) {
  check_columns(s, matrix.cols());
  Matrix out = matrix;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const auto k = static_cast<std::size_t>(j);
    out.col(j) = out.col(j).array() * s.std[k] + s.mean[k];
  }
  return out;
}

MuSigma inverse_transform_mu_sigma(const StandardScaler& s, const Matrix& mu_z, const Matrix& sigma_z) {
  check_columns(s, mu_z.cols());
  check_columns(s, sigma_z.cols());
  MuSigma out{inverse_transform(s, mu_z), sigma_z};
  for (Eigen::Index j = 0; j < out.sigma.cols(); ++j) out.sigma.col(j) *= s.std[static_cast<std::size_t>(j)];
  return out;
}

}  // namespace transit::features
