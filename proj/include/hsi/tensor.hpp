#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hsi {

using Matrix = Eigen::MatrixXd;

/// Extent of a cube: height x width x bands.
struct Dims {
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t p = 0;

  constexpr std::size_t size() const { return h * w * p; }
  constexpr std::size_t operator[](int mode) const {
    return mode == 1 ? h : mode == 2 ? w : p;
  }
  friend constexpr bool operator==(const Dims &, const Dims &) = default;
};

inline std::string to_string(const Dims &d) {
  return std::to_string(d.h) + "x" + std::to_string(d.w) + "x" + std::to_string(d.p);
}

inline void check_mode(int mode) {
  if (mode < 1 || mode > 3) {
    throw std::invalid_argument("mode must be 1, 2 or 3, got " + std::to_string(mode));
  }
}

///
/// Dense 3-D array of intensities, mode-1 (row index) fastest.
///
/// Element (i, j, k) lives at i + h * (j + w * k). Every hyperspectral
/// quantity in the library (observation, clean image, sparse noise,
/// stripes, multipliers) is a Cube of the same extent.
///
class Cube {
 public:
  Cube() = default;

  explicit Cube(Dims dims, double fill = 0.0) : dims_{dims} {
    validate(dims);
    data_.assign(dims.size(), fill);
  }

  Cube(Dims dims, std::vector<double> data) : dims_{dims}, data_{std::move(data)} {
    validate(dims);
    if (data_.size() != dims.size()) {
      throw std::invalid_argument("cube data length " + std::to_string(data_.size()) +
                                  " does not match dims " + to_string(dims));
    }
  }

  const Dims &dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double &operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[i + dims_.h * (j + dims_.w * k)];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[i + dims_.h * (j + dims_.w * k)];
  }
  double &operator[](std::size_t n) { return data_[n]; }
  double operator[](std::size_t n) const { return data_[n]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double *data() { return data_.data(); }
  const double *data() const { return data_.data(); }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  /// Band k as an h x w column-major matrix view.
  Eigen::Map<const Matrix> band(std::size_t k) const {
    return {data_.data() + k * dims_.h * dims_.w, static_cast<Eigen::Index>(dims_.h),
            static_cast<Eigen::Index>(dims_.w)};
  }
  Eigen::Map<Matrix> band(std::size_t k) {
    return {data_.data() + k * dims_.h * dims_.w, static_cast<Eigen::Index>(dims_.h),
            static_cast<Eigen::Index>(dims_.w)};
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Cube &operator+=(const Cube &o) {
    check_same(o);
    for (std::size_t n = 0; n < data_.size(); ++n) data_[n] += o.data_[n];
    return *this;
  }
  Cube &operator-=(const Cube &o) {
    check_same(o);
    for (std::size_t n = 0; n < data_.size(); ++n) data_[n] -= o.data_[n];
    return *this;
  }
  Cube &operator*=(double s) {
    for (double &v : data_) v *= s;
    return *this;
  }
  friend Cube operator+(Cube a, const Cube &b) { return a += b; }
  friend Cube operator-(Cube a, const Cube &b) { return a -= b; }
  friend Cube operator*(Cube a, double s) { return a *= s; }
  friend Cube operator*(double s, Cube a) { return a *= s; }

  friend bool operator==(const Cube &, const Cube &) = default;

 private:
  static void validate(const Dims &d) {
    if (d.h == 0 || d.w == 0 || d.p == 0) {
      throw std::invalid_argument("cube dims must be positive, got " + to_string(d));
    }
  }
  void check_same(const Cube &o) const {
    if (o.dims_ != dims_) {
      throw std::invalid_argument("cube dims differ: " + to_string(dims_) + " vs " +
                                  to_string(o.dims_));
    }
  }

  Dims dims_{};
  std::vector<double> data_;
};

/// Mode-n matricization (Kolda-Bader ordering: remaining indices in
/// ascending mode order, lower mode fastest).
inline Matrix unfold(const Cube &t, int mode) {
  check_mode(mode);
  const auto [h, w, p] = t.dims();
  const auto H = static_cast<Eigen::Index>(h);
  const auto W = static_cast<Eigen::Index>(w);
  const auto P = static_cast<Eigen::Index>(p);
  switch (mode) {
    case 1:
      return Eigen::Map<const Matrix>(t.data(), H, W * P);
    case 2: {
      Matrix m(W, H * P);
      for (std::size_t k = 0; k < p; ++k)
        m.middleCols(static_cast<Eigen::Index>(k * h), H) = t.band(k).transpose();
      return m;
    }
    default:
      return Eigen::Map<const Matrix>(t.data(), H * W, P).transpose();
  }
}

/// Inverse of unfold for a target extent.
inline Cube fold(const Matrix &m, int mode, const Dims &dims) {
  check_mode(mode);
  const auto [h, w, p] = dims;
  const auto H = static_cast<Eigen::Index>(h);
  const auto W = static_cast<Eigen::Index>(w);
  const auto P = static_cast<Eigen::Index>(p);
  const Eigen::Index rows = static_cast<Eigen::Index>(dims[mode]);
  if (m.rows() != rows || m.cols() * rows != static_cast<Eigen::Index>(dims.size())) {
    throw std::invalid_argument("fold: matrix shape does not match dims " + to_string(dims));
  }
  Cube t(dims);
  switch (mode) {
    case 1:
      Eigen::Map<Matrix>(t.data(), H, W * P) = m;
      break;
    case 2:
      for (std::size_t k = 0; k < p; ++k)
        t.band(k) = m.middleCols(static_cast<Eigen::Index>(k * h), H).transpose();
      break;
    default:
      Eigen::Map<Matrix>(t.data(), H * W, P) = m.transpose();
  }
  return t;
}

/// n-mode product t x_n m; m must have dim_n(t) columns.
inline Cube mode_product(const Cube &t, const Matrix &m, int mode) {
  check_mode(mode);
  const Dims d = t.dims();
  if (m.cols() != static_cast<Eigen::Index>(d[mode]) || m.rows() == 0) {
    throw std::invalid_argument("mode_product: matrix has " + std::to_string(m.cols()) +
                                " columns, mode " + std::to_string(mode) + " has extent " +
                                std::to_string(d[mode]));
  }
  const auto R = m.rows();
  const auto r = static_cast<std::size_t>(R);
  const auto H = static_cast<Eigen::Index>(d.h);
  const auto W = static_cast<Eigen::Index>(d.w);
  const auto P = static_cast<Eigen::Index>(d.p);
  switch (mode) {
    case 1: {
      Cube out({r, d.w, d.p});
      Eigen::Map<Matrix>(out.data(), R, W * P).noalias() =
          m * Eigen::Map<const Matrix>(t.data(), H, W * P);
      return out;
    }
    case 2: {
      Cube out({d.h, r, d.p});
      for (std::size_t k = 0; k < d.p; ++k) out.band(k).noalias() = t.band(k) * m.transpose();
      return out;
    }
    default: {
      Cube out({d.h, d.w, r});
      Eigen::Map<Matrix>(out.data(), H * W, R).noalias() =
          Eigen::Map<const Matrix>(t.data(), H * W, P) * m.transpose();
      return out;
    }
  }
}

inline double dot(const Cube &a, const Cube &b) {
  if (a.dims() != b.dims()) throw std::invalid_argument("dot: dims differ");
  double s = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) s += a[n] * b[n];
  return s;
}

inline double fro_norm(const Cube &t) {
  double s = 0.0;
  for (double v : t) s += v * v;
  return std::sqrt(s);
}

namespace detail {

inline void fix_signs(Matrix &u) {
  for (Eigen::Index c = 0; c < u.cols(); ++c) {
    Eigen::Index arg = 0;
    u.col(c).cwiseAbs().maxCoeff(&arg);
    if (u(arg, c) < 0.0) u.col(c) *= -1.0;
  }
}

/// Leading r left singular vectors, allowing r up to rows(m). Columns
/// past min(rows, cols) span part of the left null space.
inline Matrix leading_basis(const Matrix &m, std::size_t r) {
  const auto rank = static_cast<Eigen::Index>(r);
  Matrix u;
  if (rank <= m.cols()) {
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU);
    u = svd.matrixU().leftCols(rank);
  } else {
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeFullU);
    u = svd.matrixU().leftCols(rank);
  }
  fix_signs(u);
  return u;
}

}  // namespace detail

///
/// Top-r left singular vectors of m as orthonormal columns.
///
/// Each column is sign-normalized so that its largest-magnitude entry
/// is nonnegative (first such entry on ties), which makes repeated
/// decompositions of the same input reproducible.
///
inline Matrix leading_left_singular_vectors(const Matrix &m, std::size_t r) {
  if (r == 0 || static_cast<Eigen::Index>(r) > std::min(m.rows(), m.cols())) {
    throw std::invalid_argument("leading_left_singular_vectors: r=" + std::to_string(r) +
                                " out of range for " + std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()) + " matrix");
  }
  return detail::leading_basis(m, r);
}

}  // namespace hsi
