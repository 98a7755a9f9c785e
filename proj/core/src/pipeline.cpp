#include "transit/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "transit/parallel.hpp"

namespace transit::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

void PipelineConfig::validate() const {
  if (n_bins > kAirsColumns) throw ConfigError("n_bins must lie in [0, 356]");
  schema.validate();
  ridge.validate();
  score.validate();
  calibration.validate();
  if (smooth_window % 2 == 0) throw ConfigError("smooth_window must be odd");
  if (k < 2) throw ConfigError("k must be >= 2");
}

std::size_t PipelineConfig::feature_count() const { return (2 + n_bins) * schema.per_signal(); }

namespace {

json calib_json(const calib::CalibConfig& c) {
  return {{"steps", c.steps}, {"time_bin", c.time_bin}, {"flat_min", c.flat_min}};
}

calib::CalibConfig calib_from_json(const json& j, calib::CalibConfig c) {
  c.steps = j.value("steps", c.steps);
  c.time_bin = j.value("time_bin", c.time_bin);
  c.flat_min = j.value("flat_min", c.flat_min);
  return c;
}

const std::set<std::string> kConfigKeys = {"preset", "n_bins", "geometric_correction", "target_scaling",
                                           "ensemble_uncertainty", "schema", "ridge", "score", "calibration",
                                           "smooth_window", "guard", "k", "seed"};

}  // namespace

json PipelineConfig::to_json() const {
  return {{"preset", preset},
          {"n_bins", n_bins},
          {"geometric_correction", geometric_correction},
          {"target_scaling", target_scaling},
          {"ensemble_uncertainty", ensemble_uncertainty},
          {"schema", schema.to_json()},
          {"feature_count", feature_count()},
          {"ridge", ridge.to_json()},
          {"score", score.to_json()},
          {"calibration", calib_json(calibration)},
          {"smooth_window", smooth_window},
          {"guard", guard},
          {"k", k},
          {"seed", seed}};
}

bool PipelineConfig::same_settings(const PipelineConfig& other) const {
  json a = to_json();
  json b = other.to_json();
  for (const char* key : {"preset", "k", "seed"}) {
    a.erase(key);
    b.erase(key);
  }
  return a == b;
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "feature_count" && !kConfigKeys.count(key)) throw ConfigError("unknown pipeline config key: " + key);
  }
  try {
    const std::string name = j.value("preset", std::string("custom"));
    PipelineConfig c = name == "custom" ? PipelineConfig{} : pipeline::preset(name);
    c.n_bins = j.value("n_bins", c.n_bins);
    c.geometric_correction = j.value("geometric_correction", c.geometric_correction);
    c.target_scaling = j.value("target_scaling", c.target_scaling);
    c.ensemble_uncertainty = j.value("ensemble_uncertainty", c.ensemble_uncertainty);
    if (j.contains("schema")) c.schema = features::FeatureSchema::from_json(j["schema"]);
    if (j.contains("ridge")) {
      json merged = c.ridge.to_json();
      merged.update(j["ridge"]);
      c.ridge = model::RidgeConfig::from_json(merged);
    }
    if (j.contains("score")) {
      json merged = c.score.to_json();
      merged.update(j["score"]);
      c.score = scoring::ScoreConfig::from_json(merged);
    }
    if (j.contains("calibration")) c.calibration = calib_from_json(j["calibration"], c.calibration);
    c.smooth_window = j.value("smooth_window", c.smooth_window);
    c.guard = j.value("guard", c.guard);
    c.k = j.value("k", c.k);
    c.seed = j.value("seed", c.seed);
    // a preset edited by hand is no longer that preset
    if (c.preset != "custom" && !c.same_settings(pipeline::preset(c.preset))) c.preset = "custom";
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
}

std::vector<std::string> preset_names() { return {"iter1", "iter2", "iter3", "iter4", "iter5", "iter6", "iter7"}; }

PipelineConfig preset(const std::string& name) {
  struct Row {
    const char* name;
    std::size_t bins;
    bool full_schema;
    bool geometric;
    bool target_scaling;
    bool ensemble;
  };
  static constexpr Row kRows[] = {
      {"iter1", 0, false, false, false, false}, {"iter2", 5, true, false, true, false},
      {"iter3", 8, false, false, false, false}, {"iter4", 8, true, false, true, false},
      {"iter5", 8, true, true, true, false},    {"iter6", 8, true, false, true, true},
      {"iter7", 10, true, false, true, true},
  };
  for (const Row& r : kRows) {
    if (name != r.name) continue;
    PipelineConfig c;
    c.preset = r.name;
    c.n_bins = r.bins;
    c.schema = r.full_schema ? features::FeatureSchema::full() : features::FeatureSchema::minimal();
    c.geometric_correction = r.geometric;
    c.target_scaling = r.target_scaling;
    c.ensemble_uncertainty = r.ensemble;
    return c;
  }
  throw ConfigError("unknown preset: " + name);
}

ProcessedPlanet process_planet(const io::DatasetManifest& manifest, const io::PlanetEntry& planet,
                               const PipelineConfig& config) {
  auto load = [&](const fs::path& cube_path, const std::optional<fs::path>& calib_dir) {
    SpectralCube cube = io::load_cube(manifest.resolve(cube_path));
    if (cube.calibrated()) return cube;
    if (!calib_dir) throw FormatError("planet " + planet.planet_id + ": raw cube without calibration directory");
    return calib::calibrate(cube, calib::load_calibration(manifest.resolve(*calib_dir)), config.calibration);
  };
  try {
    const SpectralCube airs = load(planet.airs, planet.airs_calib);
    const SpectralCube fgs = load(planet.fgs, planet.fgs_calib);
    if (airs.channel() != Channel::Airs || fgs.channel() != Channel::Fgs) {
      throw FormatError("planet " + planet.planet_id + ": channel mismatch");
    }
    if (airs.frames() != fgs.frames()) throw DataError("planet " + planet.planet_id + ": AIRS and FGS frame counts differ");

    ProcessedPlanet out;
    const Matrix columns = curves::cube_to_column_curves(airs);
    curves::BinnedCurves binned = curves::bin_curves(columns, curves::make_binning(std::max<std::size_t>(config.n_bins, 1)));
    out.curves.fgs = curves::cube_to_scalar_curve(fgs);
    out.curves.airs_mean = std::move(binned.mean);
    if (config.n_bins > 0) out.curves.airs_bins = std::move(binned.bins);

    const std::size_t T = out.curves.airs_mean.flux.size();
    const std::size_t guard = config.guard > 0 ? config.guard : detrend::default_guard(T);
    out.segmentation = detrend::find_breakpoints(out.curves.airs_mean, config.smooth_window, guard);
    const std::vector<IndexRange> oot = {out.segmentation.zone(detrend::Zone::Left),
                                         out.segmentation.zone(detrend::Zone::Right)};
    for (LightCurve* c : out.curves.signals()) {
      *c = curves::normalize_curve(c->flux, oot, c->label);
      if (config.geometric_correction) *c = detrend::geometric_correction(*c, out.segmentation);
    }
    out.features = features::extract_features(out.curves, out.segmentation, config.schema);
    return out;
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    // keep the exception type, prefix the planet for context
    const std::string msg = e.what();
    if (msg.find(planet.planet_id) != std::string::npos) throw;
    if (dynamic_cast<const SegmentationError*>(&e)) throw SegmentationError(planet.planet_id + ": " + msg);
    if (dynamic_cast<const FormatError*>(&e)) throw FormatError(planet.planet_id + ": " + msg);
    throw;
  }
}

features::FeatureMatrix extract_dataset_features(const io::DatasetManifest& manifest, const PipelineConfig& config) {
  config.validate();
  std::vector<features::FeatureRow> rows(manifest.planets.size());
  parallel_for(rows.size(), [&](std::size_t i) {
    rows[i] = process_planet(manifest, manifest.planets[i], config).features;
  });
  return features::assemble(manifest.planet_ids(), rows);
}

io::DatasetManifest calibrate_dataset(const io::DatasetManifest& manifest, const fs::path& out_root,
                                      const calib::CalibConfig& config) {
  config.validate();
  io::DatasetManifest out = manifest;
  out.root = out_root;
  std::error_code ec;
  fs::create_directories(out_root, ec);
  if (ec) throw IoError("cannot create " + out_root.string() + ": " + ec.message());

  auto convert = [&](const fs::path& rel, const std::optional<fs::path>& calib_dir) {
    const SpectralCube cube = io::load_cube(manifest.resolve(rel));
    const fs::path target = out_root / rel;
    fs::create_directories(target.parent_path(), ec);
    if (ec) throw IoError("cannot create " + target.parent_path().string());
    if (cube.calibrated()) {
      io::save_cube(cube, target);
      return;
    }
    if (!calib_dir) throw FormatError("raw cube without calibration directory: " + rel.string());
    io::save_cube(calib::calibrate(cube, calib::load_calibration(manifest.resolve(*calib_dir)), config), target);
  };
  parallel_for(manifest.planets.size(), [&](std::size_t i) {
    const auto& p = manifest.planets[i];
    convert(p.airs, p.airs_calib);
    convert(p.fgs, p.fgs_calib);
  });
  for (auto& p : out.planets) {
    p.airs_calib.reset();
    p.fgs_calib.reset();
  }
  if (manifest.targets) {
    fs::copy_file(manifest.resolve(*manifest.targets), out_root / *manifest.targets,
                  fs::copy_options::overwrite_existing, ec);
    if (ec) throw IoError("cannot copy targets: " + ec.message());
  }
  io::save_manifest(out);
  return io::load_manifest(out_root);
}

Matrix target_matrix(const features::FeatureMatrix& features, const std::vector<TargetSpectrum>& targets) {
  std::map<std::string, const TargetSpectrum*> by_id;
  for (const auto& t : targets) by_id[t.planet_id] = &t;
  Matrix Y(static_cast<Eigen::Index>(features.planet_ids.size()), static_cast<Eigen::Index>(kSpectrumLength));
  for (std::size_t i = 0; i < features.planet_ids.size(); ++i) {
    auto it = by_id.find(features.planet_ids[i]);
    if (it == by_id.end()) throw DataError("no target spectrum for planet " + features.planet_ids[i]);
    if (it->second->depth.size() != kSpectrumLength) throw DataError("target spectrum of wrong length");
    for (std::size_t w = 0; w < kSpectrumLength; ++w) {
      Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(w)) = it->second->depth[w];
    }
  }
  return Y;
}

model::BaggedModel train(const features::FeatureMatrix& features, const std::vector<TargetSpectrum>& targets,
                         const PipelineConfig& config) {
  config.validate();
  model::FitOptions options;
  options.scale_targets = config.target_scaling;
  options.uncertainty = config.ensemble_uncertainty ? model::Uncertainty::Ensemble : model::Uncertainty::Fixed;
  return model::fit_bagged(features, target_matrix(features, targets), config.ridge, options);
}

features::FeatureMatrix take_planets(const features::FeatureMatrix& features, const std::vector<std::string>& ids) {
  std::map<std::string, Eigen::Index> row_of;
  for (std::size_t i = 0; i < features.planet_ids.size(); ++i) {
    row_of[features.planet_ids[i]] = static_cast<Eigen::Index>(i);
  }
  features::FeatureMatrix out;
  out.names = features.names;
  out.planet_ids = ids;
  out.values.resize(static_cast<Eigen::Index>(ids.size()), features.values.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = row_of.find(ids[i]);
    if (it == row_of.end()) throw DataError("no features for planet " + ids[i]);
    out.values.row(static_cast<Eigen::Index>(i)) = features.values.row(it->second);
  }
  return out;
}

json CrossValidation::to_json() const {
  json fold_list = json::array();
  for (const auto& f : folds) fold_list.push_back(f.to_json());
  return {{"k", folds.size()},
          {"macro_score", macro_score},
          {"macro_score_clipped", macro_score_clipped},
          {"folds", fold_list}};
}

CrossValidation cross_validate(const io::DatasetManifest& manifest, const features::FeatureMatrix& features,
                               const PipelineConfig& config) {
  config.validate();
  const std::vector<TargetSpectrum> targets = io::load_dataset_targets(manifest);
  std::map<std::string, const TargetSpectrum*> by_id;
  for (const auto& t : targets) by_id[t.planet_id] = &t;
  auto targets_of = [&](const std::vector<std::string>& ids) {
    std::vector<TargetSpectrum> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(*by_id.at(id));
    return out;
  };

  const auto folds = scoring::grouped_kfold(manifest, config.k, config.seed);
  CrossValidation cv;
  std::map<std::string, std::pair<SpectrumPrediction, TargetSpectrum>> oof;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto train_targets = targets_of(folds[f].train_ids);
    const auto valid_targets = targets_of(folds[f].validation_ids);
    const model::BaggedModel m = train(take_planets(features, folds[f].train_ids), train_targets, config);
    const auto preds = model::predict(m, take_planets(features, folds[f].validation_ids));
    const auto reference = scoring::fit_reference(train_targets);
    scoring::ScoreReport report = scoring::evaluate(preds, valid_targets, reference, config.score);
    report.fold = static_cast<int>(f);
    cv.folds.push_back(std::move(report));
    for (std::size_t i = 0; i < preds.size(); ++i) oof[preds[i].planet_id] = {preds[i], valid_targets[i]};
  }
  double total = 0.0;
  double total_clipped = 0.0;
  for (const auto& r : cv.folds) {
    total += r.score;
    total_clipped += r.score_clipped;
  }
  cv.macro_score = total / static_cast<double>(cv.folds.size());
  cv.macro_score_clipped = total_clipped / static_cast<double>(cv.folds.size());
  for (auto& [id, pair] : oof) {
    cv.predictions.push_back(std::move(pair.first));
    cv.truth.push_back(std::move(pair.second));
  }
  return cv;
}

CrossValidation cross_validate(const io::DatasetManifest& manifest, const PipelineConfig& config) {
  return cross_validate(manifest, extract_dataset_features(manifest, config), config);
}

}  // namespace transit::pipeline
