#pragma once

#include <fftw3.h>

#include <Eigen/Core>
#include <complex>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace kmf {

// 2D Fourier calculus on the unit lattice coordinates (a,b) of a torus
// C/(Z + tau Z), z = a + tau b, on an n x n uniform grid (node idx = ib*n+ia).
// Modes are e^{2 pi i (ja*a + jb*b)}; analyze returns coefficients in the same
// n x n layout with unsigned indices (signed frequency = j <= n/2 ? j : j-n).
// FFTW plans and buffers are shared, guarded by a mutex.
class TorusTransform {
 public:
  using Complex = std::complex<double>;

  TorusTransform(int n, Complex tau) : n_(n), tau_(tau) {
    if (n_ < 4) throw std::invalid_argument("TorusTransform: n too small");
    if (tau_.imag() <= 0.0) throw std::invalid_argument("TorusTransform: Im tau must be positive");
    buf_in_ = fftw_alloc_complex(static_cast<size_t>(n_) * n_);
    buf_out_ = fftw_alloc_complex(static_cast<size_t>(n_) * n_);
    std::lock_guard<std::mutex> lock(fftw_mutex());
    // row-major (ib, ia): FFTW dims {n_b, n_a}
    fwd_ = fftw_plan_dft_2d(n_, n_, buf_in_, buf_out_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_2d(n_, n_, buf_in_, buf_out_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }

  ~TorusTransform() {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_in_);
    fftw_free(buf_out_);
  }

  TorusTransform(const TorusTransform&) = delete;
  TorusTransform& operator=(const TorusTransform&) = delete;

  int n() const { return n_; }
  Complex tau() const { return tau_; }
  int signed_freq(int j) const { return j <= n_ / 2 ? j : j - n_; }

  // f_hat = (1/n^2) sum f e^{-2 pi i (ja a + jb b)}
  Eigen::VectorXcd analyze(const Eigen::VectorXd& f) const {
    check(f.size());
    std::lock_guard<std::mutex> lock(fftw_mutex());
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      buf_in_[i][0] = f[i];
      buf_in_[i][1] = 0.0;
    }
    fftw_execute(fwd_);
    Eigen::VectorXcd out(f.size());
    const double s = 1.0 / (static_cast<double>(n_) * n_);
    for (Eigen::Index i = 0; i < f.size(); ++i) out[i] = Complex(buf_out_[i][0], buf_out_[i][1]) * s;
    return out;
  }

  Eigen::VectorXd synthesize(const Eigen::VectorXcd& coef) const {
    check(coef.size());
    std::lock_guard<std::mutex> lock(fftw_mutex());
    for (Eigen::Index i = 0; i < coef.size(); ++i) {
      buf_in_[i][0] = coef[i].real();
      buf_in_[i][1] = coef[i].imag();
    }
    fftw_execute(bwd_);
    Eigen::VectorXd out(coef.size());
    for (Eigen::Index i = 0; i < coef.size(); ++i) out[i] = buf_out_[i][0];
    return out;
  }

  Eigen::VectorXcd synthesize_complex(const Eigen::VectorXcd& coef) const {
    check(coef.size());
    std::lock_guard<std::mutex> lock(fftw_mutex());
    for (Eigen::Index i = 0; i < coef.size(); ++i) {
      buf_in_[i][0] = coef[i].real();
      buf_in_[i][1] = coef[i].imag();
    }
    fftw_execute(bwd_);
    Eigen::VectorXcd out(coef.size());
    for (Eigen::Index i = 0; i < coef.size(); ++i) out[i] = Complex(buf_out_[i][0], buf_out_[i][1]);
    return out;
  }

  // |jb - ja*tau|^2 for the mode at flat index (signed frequencies)
  double lattice_norm2(int ja, int jb) const {
    const double t1 = tau_.real(), t2 = tau_.imag();
    const double re = jb - ja * t1;
    return re * re + ja * ja * t2 * t2;
  }

  // dd^c multiplier as a density against omega_0: dd^c e_m / omega_0 =
  // -(pi/Im tau) |jb - ja tau|^2 e_m
  double ddc_multiplier(int ja, int jb) const {
    return -(M_PI / tau_.imag()) * lattice_norm2(ja, jb);
  }

  template <typename F>
  void for_each_mode(F&& fn) const {
    for (int ib = 0; ib < n_; ++ib)
      for (int ia = 0; ia < n_; ++ia)
        fn(ib * n_ + ia, signed_freq(ia), signed_freq(ib));
  }

  static std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
  }

 private:
  void check(Eigen::Index sz) const {
    if (sz != static_cast<Eigen::Index>(n_) * n_)
      throw std::invalid_argument("TorusTransform: size mismatch");
  }

  int n_;
  Complex tau_;
  fftw_complex* buf_in_;
  fftw_complex* buf_out_;
  fftw_plan fwd_, bwd_;
};

}  // namespace kmf
