#pragma once

// Shared numeric domain types for the visual MPC engine.
//
// Coordinates are (x = column, y = row) with the origin at the top-left
// pixel. Rasters are stored planar: channel c occupies the contiguous block
// [c*h*w, (c+1)*h*w), each block row-major.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vismpc {

enum class Errc {
  NegativeMass,
  NotNormalized,
  OutOfBounds,
  InvalidFrame,
  InvalidKernel,
  KernelNotNormalized,
  MaskCountMismatch,
  ShapeMismatch,
  ZeroMass,
  DisplacementTooLarge,
  ObjectGone,
  NonFiniteLoss,
  EmptySuite,
  InvalidConfig,
  Io,
};

const char* to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

struct Coord {
  int x = 0;
  int y = 0;
  friend bool operator==(const Coord&, const Coord&) = default;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline Vec2 to_vec(Coord c) { return {static_cast<double>(c.x), static_cast<double>(c.y)}; }

/// Single-channel H x W grid of reals.
class Plane {
 public:
  Plane() = default;
  Plane(int height, int width, double fill = 0.0);

  int height() const { return h_; }
  int width() const { return w_; }
  std::size_t size() const { return data_.size(); }

  double& at(int x, int y) { return data_[static_cast<std::size_t>(y) * w_ + x]; }
  double at(int x, int y) const { return data_[static_cast<std::size_t>(y) * w_ + x]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  double sum() const;

 private:
  int h_ = 0;
  int w_ = 0;
  std::vector<double> data_;
};

/// H x W x C observation with values in [0,1].
class Frame {
 public:
  static constexpr int kMinSide = 8;

  Frame() = default;
  /// Throws InvalidFrame when the shape is outside the supported range.
  Frame(int height, int width, int channels, double fill = 0.0);
  /// Takes ownership of planar data; every element must lie in [0,1].
  Frame(int height, int width, int channels, std::vector<double> data);

  int height() const { return h_; }
  int width() const { return w_; }
  int channels() const { return c_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(h_) * w_; }

  double& at(int c, int x, int y) { return data_[c * plane_size() + static_cast<std::size_t>(y) * w_ + x]; }
  double at(int c, int x, int y) const { return data_[c * plane_size() + static_cast<std::size_t>(y) * w_ + x]; }

  std::span<double> plane(int c) { return {data_.data() + c * plane_size(), plane_size()}; }
  std::span<const double> plane(int c) const { return {data_.data() + c * plane_size(), plane_size()}; }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  /// True iff every element lies in [0,1].
  bool in_unit_range() const;
  /// Clamps every element into [0,1] (removes rounding excursions).
  void clamp_unit();

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  int h_ = 0;
  int w_ = 0;
  int c_ = 0;
  std::vector<double> data_;
};

/// Location distribution of one designated pixel.
class ProbMap {
 public:
  static constexpr double kTolerance = 1e-6;

  ProbMap() = default;
  ProbMap(int height, int width) : p_(height, width, 0.0) {}
  explicit ProbMap(Plane p) : p_(std::move(p)) {}

  int height() const { return p_.height(); }
  int width() const { return p_.width(); }
  double& at(int x, int y) { return p_.at(x, y); }
  double at(int x, int y) const { return p_.at(x, y); }
  std::span<double> data() { return p_.data(); }
  std::span<const double> data() const { return p_.data(); }
  const Plane& plane() const { return p_; }
  double sum() const { return p_.sum(); }

  /// Pixel with the largest mass; ties resolve to the lowest row-major index.
  Coord argmax() const;

 private:
  Plane p_;
};

struct ValidationError {
  Errc code;
  std::size_t index;
  double value;  // offending entry for NegativeMass, total for NotNormalized
  std::string message() const;
};

/// Success (nullopt) iff all entries are >= 0 and the total is 1 within 1e-6.
std::optional<ValidationError> validate_probmap(const ProbMap& p);

/// Map with all mass on (x, y). Throws OutOfBounds.
ProbMap one_hot_probmap(int x, int y, int height, int width);

/// Square odd-sided correlation kernel. Entry (i, j) with i,j in [0,k) weights
/// the input pixel at offset (j - r, i - r) where r = k / 2.
class Kernel {
 public:
  Kernel() = default;
  explicit Kernel(int side);  // zero kernel; throws InvalidKernel for even sides
  Kernel(int side, std::vector<double> weights);

  int side() const { return k_; }
  int radius() const { return k_ / 2; }
  double& at(int i, int j) { return w_[static_cast<std::size_t>(i) * k_ + j]; }
  double at(int i, int j) const { return w_[static_cast<std::size_t>(i) * k_ + j]; }
  std::span<const double> data() const { return w_; }
  std::span<double> data() { return w_; }
  double sum() const;
  bool normalized(double tol = 1e-6) const;

  static Kernel identity(int side);
  /// Moves content by an integer (dx, dy): out(x, y) = in(x - dx, y - dy).
  static Kernel shift(int side, int dx, int dy);
  /// Moves content by a real displacement with bilinear tap weights.
  static Kernel bilinear_shift(int side, double dx, double dy);

 private:
  int k_ = 0;
  std::vector<double> w_;
};

/// N normalized K x K transition kernels.
class KernelSet {
 public:
  KernelSet() = default;
  explicit KernelSet(std::vector<Kernel> kernels);  // throws InvalidKernel on mixed sides

  int count() const { return static_cast<int>(kernels_.size()); }
  int side() const { return kernels_.empty() ? 0 : kernels_.front().side(); }
  const Kernel& operator[](int i) const { return kernels_[static_cast<std::size_t>(i)]; }
  Kernel& operator[](int i) { return kernels_[static_cast<std::size_t>(i)]; }
  const std::vector<Kernel>& kernels() const { return kernels_; }

  /// Throws KernelNotNormalized naming the first offending kernel.
  void require_normalized(double tol = 1e-6) const;

 private:
  std::vector<Kernel> kernels_;
};

/// m per-pixel compositing weights, convex at every pixel.
class MaskSet {
 public:
  MaskSet() = default;
  MaskSet(int count, int height, int width);

  int count() const { return m_; }
  int height() const { return h_; }
  int width() const { return w_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(h_) * w_; }

  std::span<double> mask(int i) { return {data_.data() + i * plane_size(), plane_size()}; }
  std::span<const double> mask(int i) const { return {data_.data() + i * plane_size(), plane_size()}; }
  double& at(int i, int x, int y) { return data_[i * plane_size() + static_cast<std::size_t>(y) * w_ + x]; }
  double at(int i, int x, int y) const { return data_[i * plane_size() + static_cast<std::size_t>(y) * w_ + x]; }

  /// Largest |sum_i M_i(x,y) - 1| over all pixels (0 for an empty set).
  double max_partition_error() const;
  bool nonnegative() const;

 private:
  int m_ = 0;
  int h_ = 0;
  int w_ = 0;
  std::vector<double> data_;
};

struct ActionLimits {
  double a_max = 4.0;
  int lift_levels = 4;  // L: lift takes values 0..L-1
};

struct Action {
  double dx = 0.0;
  double dy = 0.0;
  int lift = 0;

  friend bool operator==(const Action&, const Action&) = default;
};

bool valid_action(const Action& a, const ActionLimits& lim);
Action clamp_action(Action a, const ActionLimits& lim);

struct Task {
  std::vector<Coord> designated;
  std::vector<Coord> goals;
  std::vector<double> weights;  // empty means all 1

  std::size_t size() const { return designated.size(); }
  double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }
  /// Throws InvalidConfig / OutOfBounds when the invariants do not hold.
  void validate(int height, int width) const;
};

}  // namespace vismpc
