#pragma once

#include "hsi/priors.hpp"
#include "hsi/tensor.hpp"

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace hsi {

///
/// Solves (a I + b D_w^T D_w) z = rhs for circular weighted differences.
///
/// D_w^T D_w is block circulant, so the 3-D DFT diagonalizes it with
/// eigenvalues sum_d w_d^2 * 4 sin^2(pi f_d / n_d). Plans are built once
/// with FFTW_ESTIMATE, which keeps results reproducible run to run.
///
class CirculantSolver {
 public:
  CirculantSolver(const Dims &dims, const TvWeights &weights) : dims_{dims} {
    weights.validate();
    const std::size_t half = dims.h / 2 + 1;
    spectrum_size_ = dims.p * dims.w * half;
    real_.reset(fftw_alloc_real(dims.size()));
    spec_.reset(fftw_alloc_complex(spectrum_size_));
    if (!real_ || !spec_) throw std::bad_alloc();
    // FFTW is row-major with the last index fastest; our layout has
    // the height index fastest, so the logical shape is (p, w, h).
    const int n0 = static_cast<int>(dims.p), n1 = static_cast<int>(dims.w),
              n2 = static_cast<int>(dims.h);
    forward_.reset(fftw_plan_dft_r2c_3d(n0, n1, n2, real_.get(), spec_.get(), FFTW_ESTIMATE));
    inverse_.reset(fftw_plan_dft_c2r_3d(n0, n1, n2, spec_.get(), real_.get(), FFTW_ESTIMATE));
    if (!forward_ || !inverse_) throw std::runtime_error("FFTW plan creation failed");

    eigen_.resize(spectrum_size_);
    auto lap = [](double wt, std::size_t f, std::size_t n) {
      const double s = std::sin(std::numbers::pi * static_cast<double>(f) / static_cast<double>(n));
      return wt * wt * 4.0 * s * s;
    };
    std::size_t idx = 0;
    for (std::size_t k = 0; k < dims.p; ++k) {
      const double ek = lap(weights.p, k, dims.p);
      for (std::size_t j = 0; j < dims.w; ++j) {
        const double ej = lap(weights.w, j, dims.w);
        for (std::size_t i = 0; i < half; ++i) eigen_[idx++] = ek + ej + lap(weights.h, i, dims.h);
      }
    }
  }

  const Dims &dims() const { return dims_; }

  /// Eigenvalues of D_w^T D_w on the half spectrum (p, w, h/2+1 layout).
  const std::vector<double> &eigenvalues() const { return eigen_; }

  Cube solve(const Cube &rhs, double a, double b) const {
    if (rhs.dims() != dims_) throw std::invalid_argument("CirculantSolver: rhs dims mismatch");
    std::copy(rhs.begin(), rhs.end(), real_.get());
    fftw_execute(forward_.get());
    const double scale = 1.0 / static_cast<double>(dims_.size());
    for (std::size_t n = 0; n < spectrum_size_; ++n) {
      const double d = scale / (a + b * eigen_[n]);
      spec_.get()[n][0] *= d;
      spec_.get()[n][1] *= d;
    }
    fftw_execute(inverse_.get());
    return Cube(dims_, std::vector<double>(real_.get(), real_.get() + dims_.size()));
  }

 private:
  struct FreeReal {
    void operator()(double *p) const { fftw_free(p); }
  };
  struct FreeComplex {
    void operator()(fftw_complex *p) const { fftw_free(p); }
  };
  struct DestroyPlan {
    void operator()(fftw_plan p) const { fftw_destroy_plan(p); }
  };

  Dims dims_;
  std::size_t spectrum_size_ = 0;
  std::unique_ptr<double, FreeReal> real_;
  std::unique_ptr<fftw_complex, FreeComplex> spec_;
  std::unique_ptr<std::remove_pointer_t<fftw_plan>, DestroyPlan> forward_;
  std::unique_ptr<std::remove_pointer_t<fftw_plan>, DestroyPlan> inverse_;
  std::vector<double> eigen_;
};

}  // namespace hsi
