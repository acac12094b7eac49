#include "vismpc/core.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace vismpc {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::NegativeMass: return "NegativeMass";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::InvalidFrame: return "InvalidFrame";
    case Errc::InvalidKernel: return "InvalidKernel";
    case Errc::KernelNotNormalized: return "KernelNotNormalized";
    case Errc::MaskCountMismatch: return "MaskCountMismatch";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::ZeroMass: return "ZeroMass";
    case Errc::DisplacementTooLarge: return "DisplacementTooLarge";
    case Errc::ObjectGone: return "ObjectGone";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::EmptySuite: return "EmptySuite";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

Plane::Plane(int height, int width, double fill)
    : h_(height), w_(width), data_(static_cast<std::size_t>(height) * width, fill) {
  if (height <= 0 || width <= 0) throw Error(Errc::ShapeMismatch, "plane dimensions must be positive");
}

double Plane::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

namespace {

void check_frame_shape(int h, int w, int c) {
  if (h < Frame::kMinSide || w < Frame::kMinSide) {
    throw Error(Errc::InvalidFrame, "frame sides must be >= 8, got " + std::to_string(w) + "x" + std::to_string(h));
  }
  if (c != 1 && c != 3) throw Error(Errc::InvalidFrame, "frame channels must be 1 or 3");
}

}  // namespace

Frame::Frame(int height, int width, int channels, double fill) : h_(height), w_(width), c_(channels) {
  check_frame_shape(height, width, channels);
  if (!(fill >= 0.0 && fill <= 1.0)) throw Error(Errc::InvalidFrame, "fill value outside [0,1]");
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Frame::Frame(int height, int width, int channels, std::vector<double> data)
    : h_(height), w_(width), c_(channels), data_(std::move(data)) {
  check_frame_shape(height, width, channels);
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw Error(Errc::InvalidFrame, "data size does not match shape");
  }
  if (!in_unit_range()) throw Error(Errc::InvalidFrame, "frame values outside [0,1]");
}

bool Frame::in_unit_range() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

void Frame::clamp_unit() {
  for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
}

Coord ProbMap::argmax() const {
  const auto d = data();
  const auto it = std::max_element(d.begin(), d.end());
  const auto idx = static_cast<int>(it - d.begin());
  return {idx % width(), idx / width()};
}

std::string ValidationError::message() const {
  std::ostringstream os;
  os << to_string(code) << " at index " << index << " (value " << value << ")";
  return os.str();
}

std::optional<ValidationError> validate_probmap(const ProbMap& p) {
  const auto d = p.data();
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(d[i] >= 0.0)) return ValidationError{Errc::NegativeMass, i, d[i]};
    total += d[i];
  }
  if (std::abs(total - 1.0) > ProbMap::kTolerance) return ValidationError{Errc::NotNormalized, d.size(), total};
  return std::nullopt;
}

ProbMap one_hot_probmap(int x, int y, int height, int width) {
  if (x < 0 || x >= width || y < 0 || y >= height) {
    throw Error(Errc::OutOfBounds, "one-hot location (" + std::to_string(x) + "," + std::to_string(y) + ") outside " +
                                       std::to_string(width) + "x" + std::to_string(height));
  }
  ProbMap p(height, width);
  p.at(x, y) = 1.0;
  return p;
}

Kernel::Kernel(int side) : k_(side), w_(static_cast<std::size_t>(side) * side, 0.0) {
  if (side <= 0 || side % 2 == 0) throw Error(Errc::InvalidKernel, "kernel side must be odd and positive");
}

Kernel::Kernel(int side, std::vector<double> weights) : Kernel(side) {
  if (weights.size() != w_.size()) throw Error(Errc::InvalidKernel, "kernel weight count does not match side");
  w_ = std::move(weights);
}

double Kernel::sum() const { return std::accumulate(w_.begin(), w_.end(), 0.0); }

bool Kernel::normalized(double tol) const {
  if (!std::all_of(w_.begin(), w_.end(), [](double v) { return v >= 0.0; })) return false;
  return std::abs(sum() - 1.0) <= tol;
}

Kernel Kernel::identity(int side) { return shift(side, 0, 0); }

Kernel Kernel::shift(int side, int dx, int dy) {
  Kernel k(side);
  const int r = k.radius();
  if (std::abs(dx) > r || std::abs(dy) > r) {
    throw Error(Errc::DisplacementTooLarge, "shift exceeds kernel radius " + std::to_string(r));
  }
  k.at(r - dy, r - dx) = 1.0;
  return k;
}

Kernel Kernel::bilinear_shift(int side, double dx, double dy) {
  Kernel k(side);
  const int r = k.radius();
  // Displacements come from differences of positions; snap rounding noise
  // so an exact 4 px move does not spill into a fifth tap.
  auto snap = [](double v) { return std::abs(v - std::round(v)) < 1e-9 ? std::round(v) : v; };
  dx = snap(dx);
  dy = snap(dy);
  const double fx = std::floor(dx);
  const double fy = std::floor(dy);
  const double tx = dx - fx;
  const double ty = dy - fy;
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const int x1 = tx > 0.0 ? x0 + 1 : x0;
  const int y1 = ty > 0.0 ? y0 + 1 : y0;
  if (std::max(std::abs(x0), std::abs(x1)) > r || std::max(std::abs(y0), std::abs(y1)) > r) {
    throw Error(Errc::DisplacementTooLarge, "displacement exceeds kernel radius " + std::to_string(r));
  }
  k.at(r - y0, r - x0) += (1.0 - tx) * (1.0 - ty);
  if (x1 != x0) k.at(r - y0, r - x1) += tx * (1.0 - ty);
  if (y1 != y0) k.at(r - y1, r - x0) += (1.0 - tx) * ty;
  if (x1 != x0 && y1 != y0) k.at(r - y1, r - x1) += tx * ty;
  return k;
}

KernelSet::KernelSet(std::vector<Kernel> kernels) : kernels_(std::move(kernels)) {
  for (const auto& k : kernels_) {
    if (k.side() != kernels_.front().side()) throw Error(Errc::InvalidKernel, "kernel set mixes sides");
  }
}

void KernelSet::require_normalized(double tol) const {
  for (int i = 0; i < count(); ++i) {
    if (!kernels_[static_cast<std::size_t>(i)].normalized(tol)) {
      throw Error(Errc::KernelNotNormalized, "kernel " + std::to_string(i) + " sums to " +
                                                 std::to_string(kernels_[static_cast<std::size_t>(i)].sum()));
    }
  }
}

MaskSet::MaskSet(int count, int height, int width)
    : m_(count), h_(height), w_(width), data_(static_cast<std::size_t>(count) * height * width, 0.0) {
  if (count < 0 || height <= 0 || width <= 0) throw Error(Errc::ShapeMismatch, "invalid mask set shape");
}

double MaskSet::max_partition_error() const {
  if (m_ == 0) return 0.0;
  double worst = 0.0;
  for (std::size_t p = 0; p < plane_size(); ++p) {
    double s = 0.0;
    for (int i = 0; i < m_; ++i) s += data_[i * plane_size() + p];
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

bool MaskSet::nonnegative() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return v >= 0.0; });
}

bool valid_action(const Action& a, const ActionLimits& lim) {
  return std::isfinite(a.dx) && std::isfinite(a.dy) && std::abs(a.dx) <= lim.a_max && std::abs(a.dy) <= lim.a_max &&
         a.lift >= 0 && a.lift < lim.lift_levels;
}

Action clamp_action(Action a, const ActionLimits& lim) {
  a.dx = std::clamp(a.dx, -lim.a_max, lim.a_max);
  a.dy = std::clamp(a.dy, -lim.a_max, lim.a_max);
  a.lift = std::clamp(a.lift, 0, lim.lift_levels - 1);
  return a;
}

void Task::validate(int height, int width) const {
  if (designated.empty()) throw Error(Errc::InvalidConfig, "task needs at least one designated pixel");
  if (designated.size() != goals.size()) throw Error(Errc::InvalidConfig, "designated/goal count mismatch");
  if (!weights.empty() && weights.size() != designated.size()) {
    throw Error(Errc::InvalidConfig, "weight count mismatch");
  }
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error(Errc::InvalidConfig, "weights must be nonnegative");
  }
  auto inside = [&](Coord c) { return c.x >= 0 && c.x < width && c.y >= 0 && c.y < height; };
  for (std::size_t i = 0; i < designated.size(); ++i) {
    if (!inside(designated[i]) || !inside(goals[i])) throw Error(Errc::OutOfBounds, "task coordinate outside frame");
  }
}

}  // namespace vismpc
