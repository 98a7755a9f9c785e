#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "transit/core.hpp"

namespace transit::io {

namespace fs = std::filesystem;

// Cube format: <stem>.bin holds raw little-endian float64 values in row-major
// (frame, row, col) order; <stem>.json is the sidecar
//   {"shape":[T,H,W], "dtype":"float64", "order":"C", "byte_order":"little", ...}
// Cubes additionally carry "channel", "calibrated" and "mask" (a companion
// <stem>.mask.bin of H*W uint8 values).

fs::path sidecar_path(const fs::path& bin);
fs::path mask_path(const fs::path& bin);

/// Writes a bare array plus sidecar. `extra` keys are merged into the sidecar.
void write_array(const Array3& array, const fs::path& bin,
                 const nlohmann::json& extra = nlohmann::json::object());
Array3 read_array(const fs::path& bin);
/// Reads and validates only the sidecar, checking the byte count of the data file.
nlohmann::json read_sidecar(const fs::path& bin);

void save_cube(const SpectralCube& cube, const fs::path& bin);
SpectralCube load_cube(const fs::path& bin);

struct PlanetEntry {
  std::string planet_id;
  std::string star_id;
  fs::path airs;  // relative to the dataset root
  fs::path fgs;
  std::optional<fs::path> airs_calib;  // calibration directories, absent for calibrated cubes
  std::optional<fs::path> fgs_calib;
};

struct DatasetManifest {
  fs::path root;
  std::vector<PlanetEntry> planets;  // sorted by planet_id
  std::optional<fs::path> targets;   // relative path of targets.csv
  nlohmann::json wavelength_grid = nlohmann::json::object();

  std::vector<std::string> planet_ids() const;
  std::vector<std::string> star_ids() const;  // distinct, sorted
  const PlanetEntry& planet(const std::string& id) const;
  fs::path resolve(const fs::path& relative) const { return root / relative; }
};

DatasetManifest load_manifest(const fs::path& root);
void save_manifest(const DatasetManifest& manifest);

/// Targets in manifest order, with star ids taken from the manifest.
std::vector<TargetSpectrum> load_dataset_targets(const DatasetManifest& manifest);

// CSV files. Numbers are written with %.17g so that reading them back is exact.
std::string format_double(double value);
double parse_double(std::string_view text);
std::vector<std::string> split_csv_line(const std::string& line);

void write_targets_csv(const std::vector<TargetSpectrum>& targets, const fs::path& path);
/// Star ids are left empty; callers join them from a manifest when needed.
std::vector<TargetSpectrum> read_targets_csv(const fs::path& path);

void write_predictions_csv(const std::vector<SpectrumPrediction>& predictions, const fs::path& path);
std::vector<SpectrumPrediction> read_predictions_csv(const fs::path& path);

void write_json(const nlohmann::json& doc, const fs::path& path);
nlohmann::json read_json(const fs::path& path);

}  // namespace transit::io
