#include "transit/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace transit::io {

static_assert(std::endian::native == std::endian::little,
              "cube files are little-endian; big-endian hosts are not supported");

using nlohmann::json;

fs::path sidecar_path(const fs::path& bin) {
  fs::path p = bin;
  p.replace_extension(".json");
  return p;
}

fs::path mask_path(const fs::path& bin) {
  fs::path p = bin;
  p.replace_extension(".mask.bin");
  return p;
}

void write_json(const json& doc, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("no such file: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

namespace {

void write_bytes(const fs::path& path, const void* data, std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw FormatError("missing data file " + path.string());
  const auto size = static_cast<std::size_t>(in.tellg());
  std::vector<char> buf(size);
  in.seekg(0);
  in.read(buf.data(), static_cast<std::streamsize>(size));
  if (!in) throw IoError("read failed: " + path.string());
  return buf;
}

struct Shape {
  std::size_t frames, rows, cols;
  std::size_t count() const { return frames * rows * cols; }
};

Shape parse_shape(const json& sidecar, const fs::path& where) {
  const auto shape_it = sidecar.find("shape");
  if (shape_it == sidecar.end()) throw FormatError(where.string() + ": sidecar is missing 'shape'");
  const json& shape = *shape_it;
  const bool valid = shape.is_array() && shape.size() == 3 &&
                     std::all_of(shape.begin(), shape.end(),
                                 [](const json& v) { return v.is_number_unsigned(); });
  if (!valid) throw FormatError(where.string() + ": 'shape' must be three non-negative integers");
  if (sidecar.value("dtype", "float64") != "float64" || sidecar.value("order", "C") != "C" ||
      sidecar.value("byte_order", "little") != "little") {
    throw FormatError(where.string() + ": only float64, C order, little-endian is supported");
  }
  return {shape[0].get<std::size_t>(), shape[1].get<std::size_t>(), shape[2].get<std::size_t>()};
}

}  // namespace

void write_array(const Array3& array, const fs::path& bin, const json& extra) {
  json sidecar = {
      {"shape", {array.frames(), array.rows(), array.cols()}},
      {"dtype", "float64"},
      {"order", "C"},
      {"byte_order", "little"},
  };
  for (const auto& [k, v] : extra.items()) sidecar[k] = v;
  write_bytes(bin, array.values().data(), array.size() * sizeof(double));
  write_json(sidecar, sidecar_path(bin));
}

json read_sidecar(const fs::path& bin) {
  const fs::path side = sidecar_path(bin);
  if (!fs::exists(side)) throw FormatError("missing sidecar " + side.string());
  json sidecar = read_json(side);
  const Shape shape = parse_shape(sidecar, side);
  if (!fs::exists(bin)) throw FormatError("missing data file " + bin.string());
  const auto bytes = fs::file_size(bin);
  if (bytes != shape.count() * sizeof(double)) {
    throw FormatError(bin.string() + ": " + std::to_string(bytes) + " bytes but shape needs " +
                      std::to_string(shape.count() * sizeof(double)));
  }
  return sidecar;
}

Array3 read_array(const fs::path& bin) {
  const json sidecar = read_sidecar(bin);
  const Shape shape = parse_shape(sidecar, sidecar_path(bin));
  const auto raw = read_bytes(bin);
  std::vector<double> values(shape.count());
  std::memcpy(values.data(), raw.data(), raw.size());
  return Array3(shape.frames, shape.rows, shape.cols, std::move(values));
}

void save_cube(const SpectralCube& cube, const fs::path& bin) {
  if (bin.has_parent_path() && !fs::is_directory(bin.parent_path())) {
    throw IoError("parent directory does not exist: " + bin.parent_path().string());
  }
  const fs::path mpath = mask_path(bin);
  write_bytes(mpath, cube.mask().bytes().data(), cube.mask().bytes().size());
  write_array(cube.data(), bin,
              {{"channel", std::string(to_string(cube.channel()))},
               {"calibrated", cube.calibrated()},
               {"mask", mpath.filename().string()}});
}

SpectralCube load_cube(const fs::path& bin) {
  const json sidecar = read_sidecar(bin);
  if (!sidecar.contains("channel") || !sidecar["channel"].is_string()) {
    throw FormatError(sidecar_path(bin).string() + ": cube sidecar needs a 'channel'");
  }
  const Channel channel = channel_from_string(sidecar["channel"].get<std::string>());
  const bool calibrated = sidecar.value("calibrated", false);
  Array3 data = read_array(bin);

  PixelMask mask(data.rows(), data.cols());
  if (sidecar.contains("mask")) {
    const fs::path mpath = bin.parent_path() / sidecar["mask"].get<std::string>();
    if (fs::exists(mpath)) {
      const auto raw = read_bytes(mpath);
      if (raw.size() != mask.bytes().size()) {
        throw FormatError(mpath.string() + ": mask byte count does not match detector shape");
      }
      for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] != 0 && raw[i] != 1) throw FormatError(mpath.string() + ": mask bytes must be 0 or 1");
        mask.bytes()[i] = static_cast<std::uint8_t>(raw[i]);
      }
    }
  }
  return SpectralCube(std::move(data), std::move(mask), channel, calibrated);
}

// ---------------------------------------------------------------------------
// Manifest

std::vector<std::string> DatasetManifest::planet_ids() const {
  std::vector<std::string> ids;
  ids.reserve(planets.size());
  for (const auto& p : planets) ids.push_back(p.planet_id);
  return ids;
}

std::vector<std::string> DatasetManifest::star_ids() const {
  std::set<std::string> stars;
  for (const auto& p : planets) stars.insert(p.star_id);
  return {stars.begin(), stars.end()};
}

const PlanetEntry& DatasetManifest::planet(const std::string& id) const {
  auto it = std::lower_bound(planets.begin(), planets.end(), id,
                             [](const PlanetEntry& p, const std::string& key) { return p.planet_id < key; });
  if (it == planets.end() || it->planet_id != id) throw DataError("unknown planet id " + id);
  return *it;
}

namespace {

void check_cube_ref(const fs::path& root, const fs::path& rel, const std::string& planet) {
  const fs::path bin = root / rel;
  if (!fs::exists(bin)) throw FormatError("planet " + planet + ": dangling reference " + rel.string());
  read_sidecar(bin);
}

void check_dir_ref(const fs::path& root, const fs::path& rel, const std::string& planet) {
  if (!fs::is_directory(root / rel)) {
    throw FormatError("planet " + planet + ": dangling calibration reference " + rel.string());
  }
}

}  // namespace

DatasetManifest load_manifest(const fs::path& root) {
  const json doc = read_json(root / "manifest.json");
  DatasetManifest m;
  m.root = root;
  try {
    if (doc.contains("targets") && !doc["targets"].is_null()) {
      m.targets = fs::path(doc["targets"].get<std::string>());
      if (!fs::exists(root / *m.targets)) {
        throw FormatError("dangling targets reference " + m.targets->string());
      }
    }
    m.wavelength_grid = doc.value("wavelength_grid", json::object());
    for (const auto& e : doc.at("planets")) {
      PlanetEntry p;
      p.planet_id = e.at("planet_id").get<std::string>();
      p.star_id = e.at("star_id").get<std::string>();
      p.airs = e.at("airs").get<std::string>();
      p.fgs = e.at("fgs").get<std::string>();
      if (e.contains("airs_calib")) p.airs_calib = fs::path(e["airs_calib"].get<std::string>());
      if (e.contains("fgs_calib")) p.fgs_calib = fs::path(e["fgs_calib"].get<std::string>());
      m.planets.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  }

  std::sort(m.planets.begin(), m.planets.end(),
            [](const PlanetEntry& a, const PlanetEntry& b) { return a.planet_id < b.planet_id; });
  for (std::size_t i = 1; i < m.planets.size(); ++i) {
    if (m.planets[i].planet_id == m.planets[i - 1].planet_id) {
      throw FormatError("duplicate planet_id " + m.planets[i].planet_id);
    }
  }
  for (const auto& p : m.planets) {
    check_cube_ref(root, p.airs, p.planet_id);
    check_cube_ref(root, p.fgs, p.planet_id);
    if (p.airs_calib) check_dir_ref(root, *p.airs_calib, p.planet_id);
    if (p.fgs_calib) check_dir_ref(root, *p.fgs_calib, p.planet_id);
  }
  return m;
}

void save_manifest(const DatasetManifest& m) {
  json planets = json::array();
  for (const auto& p : m.planets) {
    json e = {{"planet_id", p.planet_id},
              {"star_id", p.star_id},
              {"airs", p.airs.generic_string()},
              {"fgs", p.fgs.generic_string()}};
    if (p.airs_calib) e["airs_calib"] = p.airs_calib->generic_string();
    if (p.fgs_calib) e["fgs_calib"] = p.fgs_calib->generic_string();
    planets.push_back(std::move(e));
  }
  json doc = {{"format", "transit-dataset"},
              {"version", 1},
              {"wavelength_grid", m.wavelength_grid},
              {"planets", std::move(planets)}};
  if (m.targets) doc["targets"] = m.targets->generic_string();
  write_json(doc, m.root / "manifest.json");
}

std::vector<TargetSpectrum> load_dataset_targets(const DatasetManifest& m) {
  if (!m.targets) throw FormatError("dataset has no targets.csv");
  auto rows = read_targets_csv(m.root / *m.targets);
  std::map<std::string, TargetSpectrum> by_id;
  for (auto& t : rows) by_id[t.planet_id] = std::move(t);
  std::vector<TargetSpectrum> out;
  out.reserve(m.planets.size());
  for (const auto& p : m.planets) {
    auto it = by_id.find(p.planet_id);
    if (it == by_id.end()) throw FormatError("targets.csv has no row for planet " + p.planet_id);
    it->second.star_id = p.star_id;
    out.push_back(std::move(it->second));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double value) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", value);
  return std::string(buf, static_cast<std::size_t>(n));
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw FormatError("not a number: '" + std::string(text) + "'");
  }
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

namespace {

std::string indexed(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%03zu", prefix, i);
  return buf;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path, std::vector<std::string>& header) {
  if (!fs::exists(path)) throw IoError("no such file: " + path.string());
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty CSV");
  header = split_csv_line(line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw FormatError(path.string() + ": row with " + std::to_string(cells.size()) +
                        " cells, header has " + std::to_string(header.size()));
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

void expect_header(const std::vector<std::string>& header, const std::vector<std::string>& expected,
                   const fs::path& path) {
  if (header != expected) throw FormatError(path.string() + ": unexpected CSV header");
}

}  // namespace

void write_targets_csv(const std::vector<TargetSpectrum>& targets, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "planet_id";
  for (std::size_t i = 0; i < kSpectrumLength; ++i) out << ',' << indexed("w", i);
  out << '\n';
  for (const auto& t : targets) {
    t.validate();
    out << t.planet_id;
    for (double d : t.depth) out << ',' << format_double(d);
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<TargetSpectrum> read_targets_csv(const fs::path& path) {
  std::vector<std::string> header;
  const auto rows = read_csv(path, header);
  std::vector<std::string> expected{"planet_id"};
  for (std::size_t i = 0; i < kSpectrumLength; ++i) expected.push_back(indexed("w", i));
  expect_header(header, expected, path);
  std::vector<TargetSpectrum> out;
  for (const auto& r : rows) {
    TargetSpectrum t;
    t.planet_id = r[0];
    t.depth.reserve(kSpectrumLength);
    for (std::size_t i = 1; i < r.size(); ++i) t.depth.push_back(parse_double(r[i]));
    t.validate();
    out.push_back(std::move(t));
  }
  return out;
}

void write_predictions_csv(const std::vector<SpectrumPrediction>& predictions, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "planet_id";
  for (std::size_t i = 0; i < kSpectrumLength; ++i) out << ',' << indexed("mu_", i);
  for (std::size_t i = 0; i < kSpectrumLength; ++i) out << ',' << indexed("sigma_", i);
  out << '\n';
  for (const auto& p : predictions) {
    p.validate();
    out << p.planet_id;
    for (double v : p.mu) out << ',' << format_double(v);
    for (double v : p.sigma) out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<SpectrumPrediction> read_predictions_csv(const fs::path& path) {
  std::vector<std::string> header;
  const auto rows = read_csv(path, header);
  std::vector<std::string> expected{"planet_id"};
  for (std::size_t i = 0; i < kSpectrumLength; ++i) expected.push_back(indexed("mu_", i));
  for (std::size_t i = 0; i < kSpectrumLength; ++i) expected.push_back(indexed("sigma_", i));
  expect_header(header, expected, path);
  std::vector<SpectrumPrediction> out;
  for (const auto& r : rows) {
    SpectrumPrediction p;
    p.planet_id = r[0];
    for (std::size_t i = 0; i < kSpectrumLength; ++i) p.mu.push_back(parse_double(r[1 + i]));
    for (std::size_t i = 0; i < kSpectrumLength; ++i) {
      p.sigma.push_back(parse_double(r[1 + kSpectrumLength + i]));
    }
    p.validate();
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace transit::io
