#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace transit {

/// Number of target wavelengths in a transmission spectrum (index 0 is the FGS band).
inline constexpr std::size_t kSpectrumLength = 283;
/// Spectral columns of the AIRS detector.
inline constexpr std::size_t kAirsColumns = 356;
/// Lower bound applied to every predicted uncertainty, in flux-ratio units.
inline constexpr double kSigmaFloor = 1e-6;

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error taxonomy. Every module throws one of these; the CLI maps IoError to
// exit code 2 and everything else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class FormatError : public Error { using Error::Error; };
class DataError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };
class CalibError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class SegmentationError : public Error { using Error::Error; };
class FeatureError : public Error { using Error::Error; };
class ModelError : public Error { using Error::Error; };
class ScoreError : public Error { using Error::Error; };
class SimError : public Error { using Error::Error; };

enum class Channel { Airs, Fgs };

std::string_view to_string(Channel channel);
Channel channel_from_string(std::string_view text);

/// Half-open index range [begin, end).
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end > begin ? end - begin : 0; }
  bool empty() const { return end <= begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Dense frames x rows x cols array, row-major with the column index fastest.
class Array3 {
 public:
  Array3() = default;
  Array3(std::size_t frames, std::size_t rows, std::size_t cols, double fill = 0.0);
  Array3(std::size_t frames, std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t frames() const { return frames_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  std::size_t frame_size() const { return rows_ * cols_; }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t t, std::size_t r, std::size_t c) {
    return values_[(t * rows_ + r) * cols_ + c];
  }
  double operator()(std::size_t t, std::size_t r, std::size_t c) const {
    return values_[(t * rows_ + r) * cols_ + c];
  }

  std::span<double> frame(std::size_t t) {
    return {values_.data() + t * frame_size(), frame_size()};
  }
  std::span<const double> frame(std::size_t t) const {
    return {values_.data() + t * frame_size(), frame_size()};
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const Array3&, const Array3&) = default;

 private:
  std::size_t frames_ = 0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Per-pixel boolean mask; true marks a dead or hot pixel.
class PixelMask {
 public:
  PixelMask() = default;
  PixelMask(std::size_t rows, std::size_t cols, bool fill = false);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool operator()(std::size_t r, std::size_t c) const { return bits_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool value = true) { bits_[r * cols_ + c] = value ? 1 : 0; }
  std::size_t count() const;

  std::span<const std::uint8_t> bytes() const { return bits_; }
  std::span<std::uint8_t> bytes() { return bits_; }

  /// Element-wise OR; shapes must agree.
  PixelMask united(const PixelMask& other) const;

  friend bool operator==(const PixelMask&, const PixelMask&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Detector signal over time with its pixel mask. Immutable once built;
/// the constructor enforces the shape and finiteness invariants.
class SpectralCube {
 public:
  SpectralCube(Array3 data, PixelMask mask, Channel channel, bool calibrated);
  /// Convenience: all-false mask.
  SpectralCube(Array3 data, Channel channel, bool calibrated);

  const Array3& data() const { return data_; }
  const PixelMask& mask() const { return mask_; }
  Channel channel() const { return channel_; }
  bool calibrated() const { return calibrated_; }

  std::size_t frames() const { return data_.frames(); }
  std::size_t rows() const { return data_.rows(); }
  std::size_t cols() const { return data_.cols(); }

  friend bool operator==(const SpectralCube&, const SpectralCube&) = default;

 private:
  Array3 data_;
  PixelMask mask_;
  Channel channel_;
  bool calibrated_;
};

struct LightCurve {
  std::vector<double> flux;
  std::string label;

  std::size_t size() const { return flux.size(); }
};

struct TargetSpectrum {
  std::string planet_id;
  std::string star_id;
  std::vector<double> depth;

  /// Throws DataError unless length is 283 and every value lies in (0, 1).
  void validate() const;
};

struct SpectrumPrediction {
  std::string planet_id;
  std::vector<double> mu;
  std::vector<double> sigma;

  /// Throws DataError unless both arrays have length 283, are finite and
  /// sigma >= kSigmaFloor.
  void validate() const;
};

/// Mean of the values selected by a set of index ranges.
double mean_over(std::span<const double> values, std::span<const IndexRange> ranges);

}  // namespace transit
