#include <doctest.h>

#include <cstring>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "transit/core.hpp"
#include "transit/io.hpp"

using namespace transit;
namespace fs = std::filesystem;

namespace {

Array3 random_array(std::mt19937_64& rng, std::size_t T, std::size_t H, std::size_t W) {
  std::normal_distribution<double> n(0.0, 1e3);
  Array3 a(T, H, W);
  for (double& v : a.values()) v = n(rng);
  return a;
}

void write_raw(const fs::path& p, std::size_t bytes) {
  std::ofstream f(p, std::ios::binary);
  std::vector<char> zeros(bytes, 0);
  f.write(zeros.data(), static_cast<std::streamsize>(zeros.size()));
}

void write_sidecar(const fs::path& bin, std::vector<std::size_t> shape) {
  io::write_json({{"shape", shape},
                  {"dtype", "float64"},
                  {"order", "C"},
                  {"byte_order", "little"},
                  {"channel", "FGS"},
                  {"calibrated", true}},
                 io::sidecar_path(bin));
}

TargetSpectrum flat_target(const std::string& id, double v) {
  return {id, "s", std::vector<double>(kSpectrumLength, v)};
}

}  // namespace

TEST_CASE("index ranges and means") {
  IndexRange r{2, 5};
  CHECK(r.size() == 3);
  CHECK(r.contains(2));
  CHECK_FALSE(r.contains(5));
  CHECK(IndexRange{4, 4}.empty());
  const std::vector<double> x = {1, 2, 3, 4, 5, 6};
  const std::vector<IndexRange> rs = {{0, 2}, {4, 6}};
  CHECK(mean_over(x, rs) == doctest::Approx(3.5));
}

TEST_CASE("array indexing is frame-row-column major") {
  Array3 a(2, 3, 4);
  a(1, 2, 3) = 7.0;
  CHECK(a.values()[(1 * 3 + 2) * 4 + 3] == 7.0);
  CHECK(a.frame(1)[2 * 4 + 3] == 7.0);
  CHECK_THROWS_AS(Array3(2, 2, 2, std::vector<double>(7, 0.0)), DataError);
}

TEST_CASE("pixel mask union and count") {
  PixelMask a(2, 2), b(2, 2);
  a.set(0, 1);
  b.set(1, 0);
  const PixelMask u = a.united(b);
  CHECK(u.count() == 2);
  CHECK(u(0, 1));
  CHECK(u(1, 0));
  CHECK(u.united(u) == u);
  CHECK_THROWS_AS(a.united(PixelMask(3, 2)), DataError);
}

TEST_CASE("spectral cube invariants") {
  CHECK_NOTHROW(SpectralCube(Array3(1, 1, 1), Channel::Fgs, false));
  CHECK_THROWS_AS(SpectralCube(Array3(2, 1, 10), Channel::Airs, false), DataError);
  CHECK_NOTHROW(SpectralCube(Array3(2, 1, kAirsColumns), Channel::Airs, false));
  Array3 bad(2, 2, 2);
  bad(1, 1, 1) = std::nan("");
  CHECK_THROWS_AS(SpectralCube(bad, Channel::Fgs, false), DataError);
  CHECK_THROWS_AS(SpectralCube(Array3(2, 2, 2), PixelMask(2, 3), Channel::Fgs, false), DataError);
  CHECK(channel_from_string("AIRS") == Channel::Airs);
  CHECK_THROWS_AS(channel_from_string("NIR"), FormatError);
}

TEST_CASE("target and prediction validation") {
  CHECK_NOTHROW(flat_target("a", 0.01).validate());
  CHECK_THROWS_AS(flat_target("a", 0.0).validate(), DataError);
  CHECK_THROWS_AS(flat_target("a", 1.0).validate(), DataError);
  TargetSpectrum short_t{"a", "s", std::vector<double>(10, 0.01)};
  CHECK_THROWS_AS(short_t.validate(), DataError);
  SpectrumPrediction p{"a", std::vector<double>(kSpectrumLength, 0.01), std::vector<double>(kSpectrumLength, 1e-7)};
  CHECK_THROWS_AS(p.validate(), DataError);
  p.sigma.assign(kSpectrumLength, 1e-5);
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("load_cube checks byte counts against the sidecar") {
  oracle::TempDir dir("core_bytes");
  const fs::path good = dir / "good.bin";
  write_raw(good, 192);
  write_sidecar(good, {4, 2, 3});
  const SpectralCube c = io::load_cube(good);
  CHECK(c.frames() == 4);
  CHECK(c.rows() == 2);
  CHECK(c.cols() == 3);

  const fs::path bad = dir / "bad.bin";
  write_raw(bad, 184);
  write_sidecar(bad, {4, 2, 3});
  CHECK_THROWS_AS(io::load_cube(bad), FormatError);
  CHECK_THROWS_AS(io::load_cube(dir / "missing.bin"), FormatError);
  CHECK_THROWS_AS(io::load_manifest(dir / "nowhere"), IoError);
}

TEST_CASE("cube save/load round-trips bit-exactly") {
  oracle::TempDir dir("core_roundtrip");
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> dim(1, 5);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t T = dim(rng), H = dim(rng), W = dim(rng);
    PixelMask mask(H, W);
    for (std::size_t r = 0; r < H; ++r) {
      for (std::size_t c = 0; c < W; ++c) mask.set(r, c, (rng() & 3u) == 0);
    }
    const SpectralCube cube(random_array(rng, T, H, W), mask, Channel::Fgs, (i % 2) == 0);
    const fs::path p = dir / ("c" + std::to_string(i % 7) + ".bin");
    io::save_cube(cube, p);
    const SpectralCube back = io::load_cube(p);
    REQUIRE(back == cube);
    REQUIRE(std::memcmp(back.data().values().data(), cube.data().values().data(), cube.data().size() * 8) == 0);
  }

  const SpectralCube full(Array3(2, 3, 3, 1.0), PixelMask(3, 3, true), Channel::Fgs, true);
  io::save_cube(full, dir / "full.bin");
  CHECK(io::load_cube(dir / "full.bin").mask().count() == 9);
  CHECK_THROWS_AS(io::save_cube(full, dir / "nope" / "x.bin"), IoError);
}

TEST_CASE("manifest loading") {
  oracle::TempDir dir("core_manifest");
  const SpectralCube airs(Array3(4, 1, kAirsColumns, 1.0), Channel::Airs, true);
  const SpectralCube fgs(Array3(4, 2, 2, 1.0), Channel::Fgs, true);
  io::DatasetManifest m;
  m.root = dir.path();
  for (const std::string id : {"p2", "p1"}) {
    fs::create_directories(dir / id);
    io::save_cube(airs, dir.path() / id / "airs.bin");
    io::save_cube(fgs, dir.path() / id / "fgs.bin");
    m.planets.push_back({id, id == "p1" ? "a" : "b", fs::path(id) / "airs.bin", fs::path(id) / "fgs.bin", {}, {}});
  }
  io::save_manifest(m);
  const auto loaded = io::load_manifest(dir.path());
  REQUIRE(loaded.planets.size() == 2);
  CHECK(loaded.planets[0].planet_id == "p1");
  CHECK(loaded.star_ids() == std::vector<std::string>{"a", "b"});
  CHECK(loaded.planet("p2").star_id == "b");
  CHECK_THROWS_AS(loaded.planet("zz"), DataError);

  SUBCASE("duplicate id") {
    auto dup = m;
    dup.planets[1].planet_id = "p2";
    io::save_manifest(dup);
    CHECK_THROWS_AS(io::load_manifest(dir.path()), FormatError);
  }
  SUBCASE("dangling reference") {
    auto dangling = m;
    dangling.planets[0].airs = "p9/airs.bin";
    io::save_manifest(dangling);
    CHECK_THROWS_AS(io::load_manifest(dir.path()), FormatError);
  }
  SUBCASE("targets are joined with star ids") {
    io::write_targets_csv({flat_target("p1", 0.01), flat_target("p2", 0.02)}, dir / "targets.csv");
    auto with_targets = m;
    with_targets.targets = fs::path("targets.csv");
    io::save_manifest(with_targets);
    const auto t = io::load_dataset_targets(io::load_manifest(dir.path()));
    REQUIRE(t.size() == 2);
    CHECK(t[0].star_id == "a");
    CHECK(t[1].depth[5] == 0.02);
  }
}

TEST_CASE("CSV round trips keep full precision") {
  oracle::TempDir dir("core_csv");
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1e-4, 0.05);
  std::vector<TargetSpectrum> targets(3);
  std::vector<SpectrumPrediction> preds(3);
  for (std::size_t i = 0; i < 3; ++i) {
    targets[i].planet_id = "p" + std::to_string(i);
    preds[i].planet_id = targets[i].planet_id;
    for (std::size_t w = 0; w < kSpectrumLength; ++w) {
      targets[i].depth.push_back(u(rng));
      preds[i].mu.push_back(u(rng));
      preds[i].sigma.push_back(u(rng));
    }
  }
  io::write_targets_csv(targets, dir / "t.csv");
  io::write_predictions_csv(preds, dir / "p.csv");
  const auto t = io::read_targets_csv(dir / "t.csv");
  const auto p = io::read_predictions_csv(dir / "p.csv");
  REQUIRE(t.size() == 3);
  REQUIRE(p.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(t[i].depth == targets[i].depth);
    CHECK(p[i].mu == preds[i].mu);
    CHECK(p[i].sigma == preds[i].sigma);
  }
  const std::string header = oracle::slurp(dir / "p.csv").substr(0, 30);
  CHECK(header.rfind("planet_id,mu_000,mu_001", 0) == 0);
  CHECK(io::parse_double("1e-5") == 1e-5);
  CHECK_THROWS_AS(io::parse_double("abc"), FormatError);
}
