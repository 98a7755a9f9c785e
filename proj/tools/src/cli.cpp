#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "transit/io.hpp"
#include "transit/pipeline.hpp"
#include "transit/scoring.hpp"
#include "transit/simgen.hpp"

namespace transit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Stage {
 public:
  Stage(std::ostream& log, std::string name)
      : log_(log), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~Stage() {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", s);
    log_ << "[stage] " << name_ << ": " << buf << " s\n";
  }
  Stage(const Stage&) = delete;
  Stage& operator=(const Stage&) = delete;

 private:
  std::ostream& log_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

bool on_off(const std::string& v) { return v == "on"; }

struct PipelineFlags {
  std::string preset;
  std::string config_path;
  std::string geometric;  // "", "on", "off"
  std::optional<std::size_t> smooth_window;
  std::optional<std::size_t> guard;
  std::optional<std::size_t> k;
  std::optional<std::uint64_t> seed;
  bool print_config = false;

  void attach(CLI::App* cmd, bool with_cv) {
    cmd->add_option("--preset", preset, "Named configuration iter1..iter7 (default iter7)")
        ->check(CLI::IsMember(pipeline::preset_names()));
    cmd->add_option("--config", config_path, "Pipeline configuration JSON");
    cmd->add_option("--geometric-correction", geometric, "Override geometric correction")
        ->check(CLI::IsMember({"on", "off"}));
    cmd->add_option("--smooth-window", smooth_window, "Breakpoint smoothing window (odd)");
    cmd->add_option("--guard", guard, "Breakpoint guard in frames (0 = automatic)");
    cmd->add_flag("--print-config", print_config, "Print the effective configuration and exit");
    if (with_cv) {
      cmd->add_option("--k", k, "Number of folds");
      cmd->add_option("--seed", seed, "Fold assignment seed");
    }
  }

  pipeline::PipelineConfig resolve() const {
    pipeline::PipelineConfig c;
    if (!config_path.empty()) {
      json j = io::read_json(config_path);
      if (!preset.empty() && j.is_object()) j["preset"] = preset;
      c = pipeline::PipelineConfig::from_json(j);
    } else {
      c = pipeline::preset(preset.empty() ? "iter7" : preset);
    }
    if (!geometric.empty()) c.geometric_correction = on_off(geometric);
    if (smooth_window) c.smooth_window = *smooth_window;
    if (guard) c.guard = *guard;
    if (k) c.k = *k;
    if (seed) c.seed = *seed;
    if (c.preset != "custom" && !c.same_settings(pipeline::preset(c.preset))) c.preset = "custom";
    c.validate();
    return c;
  }
};

void ensure_parent(const fs::path& path) {
  if (!path.has_parent_path()) return;
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  if (parts.size() != 3) throw ConfigError("grid must look like start:stop:count, got " + text);
  const double start = io::parse_double(parts[0]);
  const double stop = io::parse_double(parts[1]);
  const double count = io::parse_double(parts[2]);
  if (!(count >= 1.0) || count != std::floor(count)) throw ConfigError("grid count must be a positive integer");
  const auto n = static_cast<std::size_t>(count);
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) {
    grid[i] = n == 1 ? start : start + (stop - start) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return grid;
}

// Binary PPM, blue (low) to yellow (high), one pixel per grid cell.
void write_heatmap_ppm(const Matrix& grid, const fs::path& path) {
  ensure_parent(path);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  const double lo = grid.minCoeff();
  const double hi = grid.maxCoeff();
  f << "P6\n" << grid.cols() << ' ' << grid.rows() << "\n255\n";
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    for (Eigen::Index c = 0; c < grid.cols(); ++c) {
      const double v = hi > lo ? (grid(r, c) - lo) / (hi - lo) : 0.5;
      const auto byte = [](double x) { return static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * x))); };
      const char px[3] = {byte(v), byte(v), byte(1.0 - v)};
      f.write(px, 3);
    }
  }
  if (!f) throw IoError("write failed: " + path.string());
}

std::vector<TargetSpectrum> join_stars(std::vector<TargetSpectrum> targets, const std::string& data_dir) {
  if (data_dir.empty()) {
    for (auto& t : targets) t.star_id = "all";
    return targets;
  }
  const auto manifest = io::load_manifest(data_dir);
  for (auto& t : targets) t.star_id = manifest.planet(t.planet_id).star_id;
  return targets;
}

// Truth rows reordered to match the predictions.
std::vector<TargetSpectrum> align_truth(const std::vector<SpectrumPrediction>& preds,
                                        const std::vector<TargetSpectrum>& truth) {
  std::map<std::string, const TargetSpectrum*> by_id;
  for (const auto& t : truth) by_id[t.planet_id] = &t;
  std::vector<TargetSpectrum> out;
  out.reserve(preds.size());
  for (const auto& p : preds) {
    auto it = by_id.find(p.planet_id);
    if (it == by_id.end()) throw DataError("no truth row for planet " + p.planet_id);
    out.push_back(*it->second);
  }
  return out;
}

struct Options {
  CLI::App* simulate = nullptr;
  std::string sim_config, sim_out, sim_noise;
  std::optional<std::uint64_t> sim_seed;
  std::optional<std::size_t> sim_planets;
  bool sim_print = false;

  CLI::App* calibrate = nullptr;
  std::string cal_data, cal_out, cal_config;
  bool cal_print = false;

  CLI::App* extract = nullptr;
  PipelineFlags ext_flags;
  std::string ext_data, ext_out, ext_debug;

  CLI::App* train = nullptr;
  PipelineFlags trn_flags;
  std::string trn_data, trn_out;

  CLI::App* predict = nullptr;
  std::string prd_model, prd_data, prd_out;

  CLI::App* score = nullptr;
  std::string scr_pred, scr_truth, scr_reference, scr_data, scr_out, scr_per_planet;
  std::optional<double> scr_sigma_ideal;

  CLI::App* cv = nullptr;
  PipelineFlags cv_flags;
  std::string cv_data, cv_out, cv_pred;

  CLI::App* landscape = nullptr;
  std::string lnd_error, lnd_sigma, lnd_out, lnd_image;
};

void build(CLI::App& app, Options& o) {
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  o.simulate = app.add_subcommand("simulate", "Generate a synthetic dataset with known ground truth");
  o.simulate->add_option("--config", o.sim_config, "Simulation configuration JSON");
  o.simulate->add_option("--out", o.sim_out, "Output dataset directory");
  o.simulate->add_option("--seed", o.sim_seed, "Random seed");
  o.simulate->add_option("--noise", o.sim_noise, "Jitter noise on|off")->check(CLI::IsMember({"on", "off"}));
  o.simulate->add_option("--n-planets", o.sim_planets, "Number of planets");
  o.simulate->add_flag("--print-config", o.sim_print, "Print the effective configuration and exit");

  o.calibrate = app.add_subcommand("calibrate", "Write a calibrated copy of a raw dataset");
  o.calibrate->add_option("--data", o.cal_data, "Dataset directory");
  o.calibrate->add_option("--out", o.cal_out, "Output dataset directory");
  o.calibrate->add_option("--config", o.cal_config, "Pipeline configuration JSON (calibration section)");
  o.calibrate->add_flag("--print-config", o.cal_print, "Print the effective configuration and exit");

  o.extract = app.add_subcommand("extract", "Extract the feature table of a dataset");
  o.ext_flags.attach(o.extract, false);
  o.extract->add_option("--data", o.ext_data, "Dataset directory");
  o.extract->add_option("--out", o.ext_out, "Feature CSV");
  o.extract->add_option("--debug-dir", o.ext_debug, "Also write per-planet curves and segmentation CSVs here");

  o.train = app.add_subcommand("train", "Fit a bagged kernel ridge model on a dataset");
  o.trn_flags.attach(o.train, false);
  o.train->add_option("--data", o.trn_data, "Training dataset directory (with targets.csv)");
  o.train->add_option("--out", o.trn_out, "Model directory");

  o.predict = app.add_subcommand("predict", "Predict spectra with a trained model");
  o.predict->add_option("--model", o.prd_model, "Model directory")->required();
  o.predict->add_option("--data", o.prd_data, "Dataset directory")->required();
  o.predict->add_option("--out", o.prd_out, "Predictions CSV")->required();

  o.score = app.add_subcommand("score", "Score predictions against ground truth");
  o.score->add_option("--pred", o.scr_pred, "Predictions CSV")->required();
  o.score->add_option("--truth", o.scr_truth, "Targets CSV")->required();
  o.score->add_option("--reference", o.scr_reference,
                      "Training targets CSV for the reference baseline (default: truth)");
  o.score->add_option("--data", o.scr_data, "Dataset directory, used to attach star ids");
  o.score->add_option("--sigma-ideal", o.scr_sigma_ideal, "Uncertainty of the ideal prediction");
  o.score->add_option("--out", o.scr_out, "Score report JSON (default: stdout)");
  o.score->add_option("--per-planet", o.scr_per_planet, "Per-planet score CSV");

  o.cv = app.add_subcommand("cv", "Star-grouped K-fold cross-validation");
  o.cv_flags.attach(o.cv, true);
  o.cv->add_option("--data", o.cv_data, "Dataset directory (with targets.csv)");
  o.cv->add_option("--out", o.cv_out, "Score report JSON (default: stdout)");
  o.cv->add_option("--pred-out", o.cv_pred, "Out-of-fold predictions CSV");

  o.landscape = app.add_subcommand("landscape", "GLL of a single prediction over an error x sigma grid");
  o.landscape->add_option("--error", o.lnd_error, "Error grid start:stop:count")->required();
  o.landscape->add_option("--sigma", o.lnd_sigma, "Sigma grid start:stop:count")->required();
  o.landscape->add_option("--out", o.lnd_out, "Landscape CSV")->required();
  o.landscape->add_option("--image", o.lnd_image, "Optional PPM heatmap");
}

void require_path(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string(flag) + " is required");
}

void emit_json(const json& doc, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << doc.dump(2) << '\n';
  } else {
    ensure_parent(path);
    io::write_json(doc, path);
  }
}

int run_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  simgen::SimConfig config =
      o.sim_config.empty() ? simgen::SimConfig{} : simgen::SimConfig::from_json(io::read_json(o.sim_config));
  if (o.sim_seed) config.seed = *o.sim_seed;
  if (!o.sim_noise.empty()) config.noise = on_off(o.sim_noise);
  if (o.sim_planets) config.n_planets = *o.sim_planets;
  config.validate();
  if (o.sim_print) {
    out << config.to_json().dump(2) << '\n';
    return kExitOk;
  }
  require_path(o.sim_out, "--out");
  Stage stage(err, "simulate");
  const auto manifest = simgen::generate_dataset(config, o.sim_out);
  err << "wrote " << manifest.planets.size() << " planets to " << o.sim_out << '\n';
  return kExitOk;
}

int run_calibrate(const Options& o, std::ostream& out, std::ostream& err) {
  const pipeline::PipelineConfig config = o.cal_config.empty()
                                              ? pipeline::preset("iter7")
                                              : pipeline::PipelineConfig::from_json(io::read_json(o.cal_config));
  if (o.cal_print) {
    out << config.to_json()["calibration"].dump(2) << '\n';
    return kExitOk;
  }
  require_path(o.cal_data, "--data");
  require_path(o.cal_out, "--out");
  io::DatasetManifest manifest;
  {
    Stage stage(err, "load manifest");
    manifest = io::load_manifest(o.cal_data);
  }
  Stage stage(err, "calibrate");
  pipeline::calibrate_dataset(manifest, o.cal_out, config.calibration);
  return kExitOk;
}

int run_extract(const Options& o, std::ostream& out, std::ostream& err) {
  const auto config = o.ext_flags.resolve();
  if (o.ext_flags.print_config) {
    out << config.to_json().dump(2) << '\n';
    return kExitOk;
  }
  require_path(o.ext_data, "--data");
  require_path(o.ext_out, "--out");
  io::DatasetManifest manifest;
  {
    Stage stage(err, "load manifest");
    manifest = io::load_manifest(o.ext_data);
  }
  features::FeatureMatrix table;
  {
    Stage stage(err, "extract features");
    table = pipeline::extract_dataset_features(manifest, config);
  }
  ensure_parent(o.ext_out);
  features::write_features_csv(table, o.ext_out);
  if (!o.ext_debug.empty()) {
    Stage stage(err, "debug dumps");
    const fs::path dir = o.ext_debug;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string());
    for (const auto& p : manifest.planets) {
      const auto processed = pipeline::process_planet(manifest, p, config);
      curves::write_curves_csv(processed.curves, dir / (p.planet_id + "_curves.csv"));
      detrend::write_segmentation_csv(processed.segmentation, dir / (p.planet_id + "_segments.csv"));
    }
  }
  return kExitOk;
}

int run_train(const Options& o, std::ostream& out, std::ostream& err) {
  const auto config = o.trn_flags.resolve();
  if (o.trn_flags.print_config) {
    out << config.to_json().dump(2) << '\n';
    return kExitOk;
  }
  require_path(o.trn_data, "--data");
  require_path(o.trn_out, "--out");
  const auto manifest = io::load_manifest(o.trn_data);
  features::FeatureMatrix table;
  {
    Stage stage(err, "extract features");
    table = pipeline::extract_dataset_features(manifest, config);
  }
  model::BaggedModel fitted;
  {
    Stage stage(err, "fit model");
    fitted = pipeline::train(table, io::load_dataset_targets(manifest), config);
  }
  Stage stage(err, "save model");
  model::save_model(fitted, o.trn_out);
  io::write_json(config.to_json(), fs::path(o.trn_out) / "pipeline.json");
  return kExitOk;
}

int run_predict(const Options& o, std::ostream&, std::ostream& err) {
  const fs::path dir = o.prd_model;
  const auto config = pipeline::PipelineConfig::from_json(io::read_json(dir / "pipeline.json"));
  model::BaggedModel fitted;
  {
    Stage stage(err, "load model");
    fitted = model::load_model(dir);
  }
  const auto manifest = io::load_manifest(o.prd_data);
  features::FeatureMatrix table;
  {
    Stage stage(err, "extract features");
    table = pipeline::extract_dataset_features(manifest, config);
  }
  Stage stage(err, "predict");
  ensure_parent(o.prd_out);
  io::write_predictions_csv(model::predict(fitted, table), o.prd_out);
  return kExitOk;
}

int run_score(const Options& o, std::ostream& out, std::ostream& err) {
  Stage stage(err, "score");
  scoring::ScoreConfig config;
  if (o.scr_sigma_ideal) config.sigma_ideal = *o.scr_sigma_ideal;
  config.validate();
  const auto preds = io::read_predictions_csv(o.scr_pred);
  const auto truth = align_truth(preds, join_stars(io::read_targets_csv(o.scr_truth), o.scr_data));
  const auto reference_rows = o.scr_reference.empty() ? truth : io::read_targets_csv(o.scr_reference);
  const auto baseline = scoring::fit_reference(reference_rows);
  const auto report = scoring::evaluate(preds, truth, baseline, config);
  json doc = report.to_json();
  doc["reference"] = o.scr_reference.empty() ? "truth" : "training";
  emit_json(doc, o.scr_out, out);
  if (!o.scr_per_planet.empty()) {
    ensure_parent(o.scr_per_planet);
    scoring::write_per_planet_csv(report, o.scr_per_planet);
  }
  return kExitOk;
}

int run_cv(const Options& o, std::ostream& out, std::ostream& err) {
  const auto config = o.cv_flags.resolve();
  if (o.cv_flags.print_config) {
    out << config.to_json().dump(2) << '\n';
    return kExitOk;
  }
  require_path(o.cv_data, "--data");
  const auto manifest = io::load_manifest(o.cv_data);
  features::FeatureMatrix table;
  {
    Stage stage(err, "extract features");
    table = pipeline::extract_dataset_features(manifest, config);
  }
  pipeline::CrossValidation cv;
  {
    Stage stage(err, "cross-validate");
    cv = pipeline::cross_validate(manifest, table, config);
  }
  json doc = cv.to_json();
  doc["config"] = config.to_json();
  emit_json(doc, o.cv_out, out);
  if (!o.cv_pred.empty()) {
    ensure_parent(o.cv_pred);
    io::write_predictions_csv(cv.predictions, o.cv_pred);
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", cv.macro_score);
  err << "macro score: " << buf << '\n';
  return kExitOk;
}

int run_landscape(const Options& o, std::ostream&, std::ostream& err) {
  Stage stage(err, "landscape");
  const auto errors = parse_grid(o.lnd_error);
  const auto sigmas = parse_grid(o.lnd_sigma);
  for (double s : sigmas) {
    if (!(s > 0.0)) throw ConfigError("sigma grid values must be positive");
  }
  const Matrix grid = scoring::score_landscape(errors, sigmas);
  ensure_parent(o.lnd_out);
  scoring::write_landscape_csv(grid, errors, sigmas, o.lnd_out);
  if (!o.lnd_image.empty()) write_heatmap_ppm(grid, o.lnd_image);
  return kExitOk;
}

int dispatch(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.simulate->parsed()) return run_simulate(o, out, err);
  if (o.calibrate->parsed()) return run_calibrate(o, out, err);
  if (o.extract->parsed()) return run_extract(o, out, err);
  if (o.train->parsed()) return run_train(o, out, err);
  if (o.predict->parsed()) return run_predict(o, out, err);
  if (o.score->parsed()) return run_score(o, out, err);
  if (o.cv->parsed()) return run_cv(o, out, err);
  if (o.landscape->parsed()) return run_landscape(o, out, err);
  return kExitInvalid;
}

}  // namespace

int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transit spectrum retrieval: calibration, curve extraction, features, bagged kernel ridge, scoring",
               "transit-retrieve"};
  Options options;
  build(app, options);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* failing = &app;
    for (const auto* sub : app.get_subcommands()) failing = sub;
    err << failing->help();
    return kExitInvalid;
  }

  try {
    return dispatch(options, out, err);
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
}

int run_command(int argc, const char* const* argv) { return run_command(argc, argv, std::cout, std::cerr); }

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("transit-retrieve");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_command(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace transit::cli
