#include "transit/core.hpp"

#include <algorithm>
#include <cmath>

namespace transit {

std::string_view to_string(Channel channel) {
  return channel == Channel::Airs ? "AIRS" : "FGS";
}

Channel channel_from_string(std::string_view text) {
  if (text == "AIRS") return Channel::Airs;
  if (text == "FGS") return Channel::Fgs;
  throw FormatError("unknown channel '" + std::string(text) + "'");
}

Array3::Array3(std::size_t frames, std::size_t rows, std::size_t cols, double fill)
    : frames_(frames), rows_(rows), cols_(cols), values_(frames * rows * cols, fill) {}

Array3::Array3(std::size_t frames, std::size_t rows, std::size_t cols, std::vector<double> values)
    : frames_(frames), rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != frames * rows * cols) {
    throw DataError("Array3: value count " + std::to_string(values_.size()) +
                    " does not match shape");
  }
}

PixelMask::PixelMask(std::size_t rows, std::size_t cols, bool fill)
    : rows_(rows), cols_(cols), bits_(rows * cols, fill ? 1 : 0) {}

std::size_t PixelMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

PixelMask PixelMask::united(const PixelMask& other) const {
  if (other.rows_ != rows_ || other.cols_ != cols_) {
    throw DataError("PixelMask: cannot unite masks of different shape");
  }
  PixelMask out = *this;
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] | other.bits_[i];
  return out;
}

SpectralCube::SpectralCube(Array3 data, PixelMask mask, Channel channel, bool calibrated)
    : data_(std::move(data)), mask_(std::move(mask)), channel_(channel), calibrated_(calibrated) {
  if (data_.frames() < 1 || data_.rows() < 1 || data_.cols() < 1) {
    throw DataError("SpectralCube: every axis must be non-empty");
  }
  if (mask_.rows() != data_.rows() || mask_.cols() != data_.cols()) {
    throw DataError("SpectralCube: mask shape does not match detector shape");
  }
  if (channel_ == Channel::Airs && data_.cols() != kAirsColumns) {
    throw DataError("SpectralCube: AIRS cubes need 356 spectral columns, got " +
                    std::to_string(data_.cols()));
  }
  for (double v : data_.values()) {
    if (!std::isfinite(v)) throw DataError("SpectralCube: non-finite value in data");
  }
}

namespace {
PixelMask clear_mask_for(const Array3& data) { return PixelMask(data.rows(), data.cols()); }
}  // namespace

SpectralCube::SpectralCube(Array3 data, Channel channel, bool calibrated)
    : SpectralCube(data, clear_mask_for(data), channel, calibrated) {}

void TargetSpectrum::validate() const {
  if (depth.size() != kSpectrumLength) {
    throw DataError("target " + planet_id + ": expected 283 depths, got " +
                    std::to_string(depth.size()));
  }
  for (double d : depth) {
    if (!(d > 0.0 && d < 1.0)) {
      throw DataError("target " + planet_id + ": depth outside (0, 1)");
    }
  }
}

void SpectrumPrediction::validate() const {
  if (mu.size() != kSpectrumLength || sigma.size() != kSpectrumLength) {
    throw DataError("prediction " + planet_id + ": mu and sigma need 283 values");
  }
  for (std::size_t i = 0; i < kSpectrumLength; ++i) {
    if (!std::isfinite(mu[i]) || !std::isfinite(sigma[i])) {
      throw DataError("prediction " + planet_id + ": non-finite value");
    }
    if (sigma[i] < kSigmaFloor) {
      throw DataError("prediction " + planet_id + ": sigma below floor");
    }
  }
}

double mean_over(std::span<const double> values, std::span<const IndexRange> ranges) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : ranges) {
    for (std::size_t i = r.begin; i < r.end; ++i) {
      sum += values[i];
      ++n;
    }
  }
  if (n == 0) throw DataError("mean_over: empty selection");
  return sum / static_cast<double>(n);
}

}  // namespace transit
