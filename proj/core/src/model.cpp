#include "transit/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "transit/io.hpp"
#include "transit/parallel.hpp"

namespace transit::model {

using nlohmann::json;
namespace fs = std::filesystem;

void RidgeConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("ridge alpha must be positive");
  if (!(gamma > 0.0)) throw ConfigError("kernel gamma must be positive");
  if (degree < 1) throw ConfigError("kernel degree must be >= 1");
  if (!std::isfinite(coef0)) throw ConfigError("kernel coef0 must be finite");
  if (n_models < 2) throw ConfigError("a bag needs at least 2 models");
  if (!(sample_fraction > 0.0 && sample_fraction <= 1.0)) {
    throw ConfigError("sample_fraction must lie in (0, 1]");
  }
}

json RidgeConfig::to_json() const {
  return {{"alpha", alpha},       {"gamma", gamma},
          {"degree", degree},     {"coef0", coef0},
          {"n_models", n_models}, {"sample_fraction", sample_fraction},
          {"base_seed", base_seed}};
}

RidgeConfig RidgeConfig::from_json(const json& j) {
  RidgeConfig c;
  c.alpha = j.value("alpha", c.alpha);
  c.gamma = j.value("gamma", c.gamma);
  c.degree = j.value("degree", c.degree);
  c.coef0 = j.value("coef0", c.coef0);
  c.n_models = j.value("n_models", c.n_models);
  c.sample_fraction = j.value("sample_fraction", c.sample_fraction);
  c.base_seed = j.value("base_seed", c.base_seed);
  c.validate();
  return c;
}

Matrix kernel(const Matrix& X, const Matrix& Z, const RidgeConfig& config) {
  if (X.cols() != Z.cols()) {
    throw ModelError("kernel: input dimensions differ (" + std::to_string(X.cols()) + " vs " +
                     std::to_string(Z.cols()) + ")");
  }
  const Matrix base = (config.gamma * (X * Z.transpose())).array() + config.coef0;
  Matrix K = base;
  for (int k = 1; k < config.degree; ++k) K = K.cwiseProduct(base);
  return K;
}

Matrix RidgeMember::predict(const Matrix& X, const RidgeConfig& config) const {
  return kernel(X, train_inputs, config) * dual_coef;
}

RidgeMember fit_member(const Matrix& X, const Matrix& Y, const RidgeConfig& config) {
  if (X.rows() < 1 || X.rows() != Y.rows()) throw ModelError("fit_member: X and Y need matching, non-empty rows");
  if (!X.allFinite() || !Y.allFinite()) throw ModelError("fit_member: non-finite training data");
  Matrix K = kernel(X, X, config);
  K.diagonal().array() += config.alpha;
  Eigen::LLT<Matrix> llt(K);
  if (llt.info() != Eigen::Success) throw ModelError("fit_member: kernel matrix is not positive definite");
  return {X, llt.solve(Y)};
}

std::vector<std::size_t> bootstrap_rows(std::size_t n, const RidgeConfig& config, std::size_t index) {
  const auto count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(config.sample_fraction * static_cast<double>(n))));
  std::mt19937_64 rng(config.base_seed + index);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> rows(count);
  for (auto& r : rows) r = pick(rng);
  return rows;
}

namespace {

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

Matrix to_target_units(const BaggedModel& model, Matrix pred) {
  return model.target_scaler ? features::inverse_transform(*model.target_scaler, pred) : pred;
}

}  // namespace

std::vector<RidgeMember> fit_members(const Matrix& X, const Matrix& Y, const RidgeConfig& config) {
  config.validate();
  const auto n = static_cast<std::size_t>(X.rows());
  if (n < 2) throw ModelError("bagging needs at least 2 training rows");
  std::vector<RidgeMember> members(config.n_models);
  parallel_for(config.n_models, [&](std::size_t i) {
    const auto rows = bootstrap_rows(n, config, i);
    members[i] = fit_member(take_rows(X, rows), take_rows(Y, rows), config);
  });
  return members;
}

BaggedModel fit_bagged(const features::FeatureMatrix& X, const Matrix& Y, const RidgeConfig& config,
                       const FitOptions& options) {
  config.validate();
  X.validate();
  if (X.values.rows() != Y.rows()) throw ModelError("feature and target row counts differ");
  if (X.values.rows() < 5) throw ModelError("fit_bagged needs at least 5 training planets");

  BaggedModel model;
  model.config = config;
  model.uncertainty = options.uncertainty;
  model.feature_names = X.names;
  model.feature_scaler = features::fit_scaler(X.values, X.names);
  const Matrix Xz = features::transform(model.feature_scaler, X.values);
  if (options.scale_targets) model.target_scaler = features::fit_scaler(Y);
  const Matrix Yz = model.target_scaler ? features::transform(*model.target_scaler, Y) : Y;

  if (options.uncertainty == Uncertainty::Ensemble) {
    model.members = fit_members(Xz, Yz, config);
    return model;
  }

  // Fixed sigma: RMS residual on a seeded holdout, then one member on everything.
  const auto n = static_cast<std::size_t>(Xz.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.base_seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto holdout = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(options.holdout_fraction * static_cast<double>(n))), 1, n - 2);
  const std::vector<std::size_t> held(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(holdout));
  const std::vector<std::size_t> kept(order.begin() + static_cast<std::ptrdiff_t>(holdout), order.end());
  const RidgeMember probe = fit_member(take_rows(Xz, kept), take_rows(Yz, kept), config);
  const Matrix residual = to_target_units(model, probe.predict(take_rows(Xz, held), config)) - take_rows(Y, held);
  model.fixed_sigma = std::max(kSigmaFloor, std::sqrt(residual.squaredNorm() / static_cast<double>(residual.size())));
  model.members.push_back(fit_member(Xz, Yz, config));
  return model;
}

std::vector<Matrix> member_predictions(const BaggedModel& model, const features::FeatureMatrix& X) {
  if (X.names != model.feature_names) {
    throw ModelError("feature names do not match the model's training contract");
  }
  if (model.members.empty()) throw ModelError("model has no members");
  const Matrix Xz = features::transform(model.feature_scaler, X.values);
  std::vector<Matrix> preds(model.members.size());
  parallel_for(model.members.size(), [&](std::size_t i) {
    preds[i] = to_target_units(model, model.members[i].predict(Xz, model.config));
  });
  return preds;
}

std::vector<SpectrumPrediction> predict(const BaggedModel& model, const features::FeatureMatrix& X) {
  const auto preds = member_predictions(model, X);
  const auto m = static_cast<double>(preds.size());
  Matrix mu = Matrix::Zero(preds.front().rows(), preds.front().cols());
  for (const auto& p : preds) mu += p;
  mu /= m;

  Matrix sigma(mu.rows(), mu.cols());
  if (model.uncertainty == Uncertainty::Fixed || preds.size() < 2) {
    sigma.setConstant(model.fixed_sigma);
  } else {
    sigma.setZero();
    for (const auto& p : preds) sigma += (p - mu).cwiseAbs2();
    sigma = (sigma / (m - 1.0)).cwiseSqrt();
  }
  sigma = sigma.cwiseMax(kSigmaFloor);

  std::vector<SpectrumPrediction> out;
  out.reserve(X.planet_ids.size());
  for (Eigen::Index i = 0; i < mu.rows(); ++i) {
    SpectrumPrediction p;
    p.planet_id = X.planet_ids[static_cast<std::size_t>(i)];
    p.mu.resize(static_cast<std::size_t>(mu.cols()));
    p.sigma.resize(static_cast<std::size_t>(mu.cols()));
    for (Eigen::Index j = 0; j < mu.cols(); ++j) {
      p.mu[static_cast<std::size_t>(j)] = mu(i, j);
      p.sigma[static_cast<std::size_t>(j)] = sigma(i, j);
    }
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

Array3 as_array(const Matrix& m) {
  Array3 a(1, static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) a(0, static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = m(i, j);
  }
  return a;
}

Matrix as_matrix(const Array3& a) {
  if (a.frames() != 1) throw FormatError("model blob must have a single frame");
  Matrix m(static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a(0, i, j);
  }
  return m;
}

std::string member_file(std::size_t i, const char* what) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "member_%03zu_%s.bin", i, what);
  return buf;
}

}  // namespace

void save_model(const BaggedModel& model, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "members", ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  json doc = {{"format", "transit-bagged-krr"},
              {"version", 1},
              {"config", model.config.to_json()},
              {"uncertainty", model.uncertainty == Uncertainty::Ensemble ? "ensemble" : "fixed"},
              {"fixed_sigma", model.fixed_sigma},
              {"feature_names", model.feature_names},
              {"feature_scaler", model.feature_scaler.to_json()},
              {"target_scaler", model.target_scaler ? model.target_scaler->to_json() : json(nullptr)},
              {"n_members", model.members.size()}};
  io::write_json(doc, dir / "config.json");
  for (std::size_t i = 0; i < model.members.size(); ++i) {
    io::write_array(as_array(model.members[i].train_inputs), dir / "members" / member_file(i, "inputs"));
    io::write_array(as_array(model.members[i].dual_coef), dir / "members" / member_file(i, "dual"));
  }
}

BaggedModel load_model(const fs::path& dir) {
  const json doc = io::read_json(dir / "config.json");
  BaggedModel model;
  try {
    model.config = RidgeConfig::from_json(doc.at("config"));
    model.uncertainty = doc.at("uncertainty").get<std::string>() == "fixed" ? Uncertainty::Fixed : Uncertainty::Ensemble;
    model.fixed_sigma = doc.value("fixed_sigma", 0.0);
    model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    model.feature_scaler = features::StandardScaler::from_json(doc.at("feature_scaler"));
    if (!doc.at("target_scaler").is_null()) {
      model.target_scaler = features::StandardScaler::from_json(doc.at("target_scaler"));
    }
    const auto n = doc.at("n_members").get<std::size_t>();
    for (std::size_t i = 0; i < n; ++i) {
      RidgeMember m;
      m.train_inputs = as_matrix(io::read_array(dir / "members" / member_file(i, "inputs")));
      m.dual_coef = as_matrix(io::read_array(dir / "members" / member_file(i, "dual")));
      if (m.train_inputs.rows() != m.dual_coef.rows() ||
          static_cast<std::size_t>(m.train_inputs.cols()) != model.feature_names.size()) {
        throw FormatError("member " + std::to_string(i) + " has inconsistent shapes");
      }
      model.members.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw FormatError(dir.string() + "/config.json: " + e.what());
  }
  return model;
}

}  // namespace transit::model
