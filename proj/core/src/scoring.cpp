#include "transit/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace transit::scoring {

using nlohmann::json;

void ScoreConfig::validate() const {
  if (!(sigma_ideal > 0.0)) throw ConfigError("sigma_ideal must be positive");
  if (!wavelength_weights.empty() && wavelength_weights.size() != kSpectrumLength) {
    throw ConfigError("wavelength_weights needs 283 values");
  }
}

json ScoreConfig::to_json() const {
  return {{"sigma_ideal", sigma_ideal}, {"clip_score", clip_score}, {"wavelength_weights", wavelength_weights}};
}

ScoreConfig ScoreConfig::from_json(const json& j) {
  ScoreConfig c;
  c.sigma_ideal = j.value("sigma_ideal", c.sigma_ideal);
  c.clip_score = j.value("clip_score", c.clip_score);
  c.wavelength_weights = j.value("wavelength_weights", std::vector<double>{});
  c.validate();
  return c;
}

double gll(double y, double mu, double sigma) {
  if (!(sigma > 0.0)) throw ScoreError("gll: sigma must be positive");
  const double z = (y - mu) / sigma;
  return -0.5 * (std::log(2.0 * std::numbers::pi) + 2.0 * std::log(sigma) + z * z);
}

namespace {

double weight(const std::vector<double>& weights, std::size_t i) { return weights.empty() ? 1.0 : weights[i]; }

void check_weights(const std::vector<double>& weights) {
  if (!weights.empty() && weights.size() != kSpectrumLength) throw ScoreError("weights need 283 values");
}

}  // namespace

double sum_gll(std::span<const SpectrumPrediction> predictions, std::span<const TargetSpectrum> truth,
               const std::vector<double>& weights) {
  check_weights(weights);
  if (predictions.size() != truth.size()) throw ScoreError("prediction and truth counts differ");
  double total = 0.0;
  for (std::size_t p = 0; p < truth.size(); ++p) {
    const auto& pred = predictions[p];
    const auto& t = truth[p];
    if (pred.planet_id != t.planet_id) {
      throw ScoreError("planet id mismatch: prediction " + pred.planet_id + " vs truth " + t.planet_id);
    }
    if (pred.mu.size() != kSpectrumLength || pred.sigma.size() != kSpectrumLength ||
        t.depth.size() != kSpectrumLength) {
      throw ScoreError("planet " + t.planet_id + ": spectra need 283 values");
    }
    for (std::size_t i = 0; i < kSpectrumLength; ++i) {
      total += weight(weights, i) * gll(t.depth[i], pred.mu[i], pred.sigma[i]);
    }
  }
  return total;
}

double score(double L, double L_ideal, double L_ref) {
  if (L_ideal == L_ref) throw ScoreError("L_ideal equals L_ref; score is undefined");
  return (L - L_ref) / (L_ideal - L_ref);
}

double clip_unit(double value) { return std::clamp(value, 0.0, 1.0); }

json ReferenceBaseline::to_json() const {
  return {{"mu_ref", mu_ref}, {"sigma_ref", sigma_ref}, {"degenerate", degenerate}};
}

ReferenceBaseline ReferenceBaseline::from_json(const json& j) {
  ReferenceBaseline b;
  b.mu_ref = j.at("mu_ref").get<std::vector<double>>();
  b.sigma_ref = j.at("sigma_ref").get<std::vector<double>>();
  b.degenerate = j.value("degenerate", false);
  if (b.mu_ref.size() != kSpectrumLength || b.sigma_ref.size() != kSpectrumLength) {
    throw FormatError("reference baseline needs 283 values");
  }
  return b;
}

ReferenceBaseline fit_reference(std::span<const TargetSpectrum> train) {
  if (train.size() < 2) throw ScoreError("fit_reference needs at least 2 training planets");
  ReferenceBaseline b;
  b.mu_ref.assign(kSpectrumLength, 0.0);
  b.sigma_ref.assign(kSpectrumLength, 0.0);
  const double n = static_cast<double>(train.size());
  for (const auto& t : train) {
    if (t.depth.size() != kSpectrumLength) throw ScoreError("training target of wrong length");
    for (std::size_t i = 0; i < kSpectrumLength; ++i) b.mu_ref[i] += t.depth[i];
  }
  for (double& m : b.mu_ref) m /= n;
  for (const auto& t : train) {
    for (std::size_t i = 0; i < kSpectrumLength; ++i) {
      const double d = t.depth[i] - b.mu_ref[i];
      b.sigma_ref[i] += d * d;
    }
  }
  for (double& s : b.sigma_ref) {
    s = std::sqrt(s / n);
    if (s < kSigmaFloor) {
      s = kSigmaFloor;
      b.degenerate = true;
    }
  }
  return b;
}

std::vector<SpectrumPrediction> baseline_predictions(const ReferenceBaseline& baseline,
                                                     std::span<const TargetSpectrum> truth) {
  std::vector<SpectrumPrediction> out;
  out.reserve(truth.size());
  for (const auto& t : truth) out.push_back({t.planet_id, baseline.mu_ref, baseline.sigma_ref});
  return out;
}

double l_ideal(std::span<const TargetSpectrum> truth, const ScoreConfig& config) {
  config.validate();
  std::vector<SpectrumPrediction> ideal;
  ideal.reserve(truth.size());
  for (const auto& t : truth) {
    ideal.push_back({t.planet_id, t.depth, std::vector<double>(kSpectrumLength, config.sigma_ideal)});
  }
  return sum_gll(ideal, truth, config.wavelength_weights);
}

double l_ref(const ReferenceBaseline& baseline, std::span<const TargetSpectrum> truth,
             const std::vector<double>& weights) {
  return sum_gll(baseline_predictions(baseline, truth), truth, weights);
}

namespace {

PartialScore partial(std::span<const SpectrumPrediction> preds, std::span<const TargetSpectrum> truth,
                     const ReferenceBaseline& baseline, const ScoreConfig& config) {
  PartialScore s;
  s.L = sum_gll(preds, truth, config.wavelength_weights);
  s.L_ideal = l_ideal(truth, config);
  s.L_ref = l_ref(baseline, truth, config.wavelength_weights);
  s.score = score(s.L, s.L_ideal, s.L_ref);
  return s;
}

json partial_json(const PartialScore& s) {
  return {{"L", s.L}, {"L_ideal", s.L_ideal}, {"L_ref", s.L_ref}, {"score", s.score}};
}

}  // namespace

ScoreReport evaluate(std::span<const SpectrumPrediction> predictions, std::span<const TargetSpectrum> truth,
                     const ReferenceBaseline& baseline, const ScoreConfig& config) {
  config.validate();
  ScoreReport r;
  const PartialScore all = partial(predictions, truth, baseline, config);
  r.L = all.L;
  r.L_ideal = all.L_ideal;
  r.L_ref = all.L_ref;
  r.score = all.score;
  r.score_clipped = clip_unit(all.score);

  std::map<std::string, std::pair<std::vector<SpectrumPrediction>, std::vector<TargetSpectrum>>> by_star;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto& bucket = by_star[truth[i].star_id];
    bucket.first.push_back(predictions[i]);
    bucket.second.push_back(truth[i]);
    r.per_planet.emplace_back(truth[i].planet_id,
                              partial(predictions.subspan(i, 1), truth.subspan(i, 1), baseline, config));
  }
  for (const auto& [star, bucket] : by_star) {
    r.per_star[star] = partial(bucket.first, bucket.second, baseline, config);
  }
  return r;
}

json ScoreReport::to_json() const {
  json stars = json::object();
  for (const auto& [star, s] : per_star) stars[star] = partial_json(s);
  return {{"fold", fold},
          {"L", L},
          {"L_ideal", L_ideal},
          {"L_ref", L_ref},
          {"score", score},
          {"score_clipped", score_clipped},
          {"n_planets", per_planet.size()},
          {"per_star", stars}};
}

void write_per_planet_csv(const ScoreReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "planet_id,L,L_ideal,L_ref,score\n";
  for (const auto& [id, s] : report.per_planet) {
    out << id << ',' << io::format_double(s.L) << ',' << io::format_double(s.L_ideal) << ','
        << io::format_double(s.L_ref) << ',' << io::format_double(s.score) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<Fold> grouped_kfold(const std::vector<std::string>& planet_ids, const std::vector<std::string>& star_ids,
                                std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("grouped_kfold needs k >= 2");
  if (planet_ids.size() != star_ids.size()) throw ConfigError("one star id per planet is required");

  std::map<std::string, std::vector<std::string>> by_star;
  for (std::size_t i = 0; i < planet_ids.size(); ++i) by_star[star_ids[i]].push_back(planet_ids[i]);

  std::vector<std::vector<std::string>> validation(k);
  std::mt19937_64 rng(seed);
  for (auto& [star, planets] : by_star) {
    if (planets.size() < k) {
      throw ConfigError("star " + star + " has " + std::to_string(planets.size()) + " planets, fewer than k = " +
                        std::to_string(k));
    }
    std::sort(planets.begin(), planets.end());
    std::shuffle(planets.begin(), planets.end(), rng);
    for (std::size_t i = 0; i < planets.size(); ++i) validation[i % k].push_back(planets[i]);
  }

  std::vector<Fold> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::sort(validation[f].begin(), validation[f].end());
    folds[f].validation_ids = validation[f];
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) folds[f].train_ids.insert(folds[f].train_ids.end(), validation[g].begin(), validation[g].end());
    }
    std::sort(folds[f].train_ids.begin(), folds[f].train_ids.end());
  }
  return folds;
}

std::vector<Fold> grouped_kfold(const io::DatasetManifest& manifest, std::size_t k, std::uint64_t seed) {
  std::vector<std::string> ids;
  std::vector<std::string> stars;
  for (const auto& p : manifest.planets) {
    ids.push_back(p.planet_id);
    stars.push_back(p.star_id);
  }
  return grouped_kfold(ids, stars, k, seed);
}

Matrix score_landscape(std::span<const double> errors, std::span<const double> sigmas) {
  Matrix grid(static_cast<Eigen::Index>(errors.size()), static_cast<Eigen::Index>(sigmas.size()));
  for (std::size_t i = 0; i < errors.size(); ++i) {
    for (std::size_t j = 0; j < sigmas.size(); ++j) {
      grid(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = gll(0.0, errors[i], sigmas[j]);
    }
  }
  return grid;
}

void write_landscape_csv(const Matrix& grid, std::span<const double> errors, std::span<const double> sigmas,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "error\\sigma";
  for (double s : sigmas) out << ',' << io::format_double(s);
  out << '\n';
  for (std::size_t i = 0; i < errors.size(); ++i) {
    out << io::format_double(errors[i]);
    for (std::size_t j = 0; j < sigmas.size(); ++j) {
      out << ',' << io::format_double(grid(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace transit::scoring
