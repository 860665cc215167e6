#pragma once

#include <Eigen/Core>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace kmf {

// Spherical-harmonic transform on a Gauss-Legendre (in cos(theta)) x uniform
// (in phi) grid. Basis functions Y_lm(c,phi) = q_lm(c) e^{im phi} are
// orthonormal with respect to the uniform probability measure on the sphere:
// q_lm are the 4pi-normalized associated Legendre functions, so
// (1/2) int q_lm q_l'm dc = delta_ll'. Analysis is exact for fields band
// limited to l <= lmax, m <= mmax.
class SphereTransform {
 public:
  using Complex = std::complex<double>;

  SphereTransform(std::vector<double> cos_theta, std::vector<double> ring_weight, int n_phi)
      : c_(std::move(cos_theta)), rw_(std::move(ring_weight)), n_phi_(n_phi) {
    n_theta_ = static_cast<int>(c_.size());
    lmax_ = n_theta_ - 1;
    mmax_ = std::min(lmax_, n_phi_ / 2 - 1);
    build_tables();
  }

  int lmax() const { return lmax_; }
  int mmax() const { return mmax_; }
  int n_theta() const { return n_theta_; }
  int n_phi() const { return n_phi_; }

  // packed coefficient layout: for m = 0..mmax, l = m..lmax
  int coeff_count() const { return offs_.back(); }
  int coeff_index(int l, int m) const { return offs_[m] + (l - m); }

  // grid -> coefficients (field is real, node idx = it*n_phi + ip)
  Eigen::VectorXcd analyze(const Eigen::VectorXd& f) const {
    check_size(f.size());
    Eigen::VectorXcd out(coeff_count());
    // azimuthal DFT per ring: F_m(c_i) = (1/n_phi) sum_j f_ij e^{-im phi_j}
    Eigen::MatrixXcd F(n_theta_, mmax_ + 1);
    for (int i = 0; i < n_theta_; ++i) {
      for (int m = 0; m <= mmax_; ++m) {
        Complex acc = 0.0;
        for (int j = 0; j < n_phi_; ++j) acc += f[i * n_phi_ + j] * std::conj(expphi_(j, m));
        F(i, m) = acc / static_cast<double>(n_phi_);
      }
    }
    for (int m = 0; m <= mmax_; ++m) {
      for (int l = m; l <= lmax_; ++l) {
        Complex acc = 0.0;
        for (int i = 0; i < n_theta_; ++i) acc += rw_[i] * F(i, m) * qtab_[m](i, l - m);
        out[coeff_index(l, m)] = acc;
      }
    }
    return out;
  }

  // coefficients -> grid
  Eigen::VectorXd synthesize(const Eigen::VectorXcd& coef) const {
    check_coef(coef.size());
    Eigen::MatrixXcd F = Eigen::MatrixXcd::Zero(n_theta_, mmax_ + 1);
    for (int m = 0; m <= mmax_; ++m)
      for (int l = m; l <= lmax_; ++l) {
        const Complex a = coef[coeff_index(l, m)];
        for (int i = 0; i < n_theta_; ++i) F(i, m) += a * qtab_[m](i, l - m);
      }
    Eigen::VectorXd f(n_theta_ * n_phi_);
    for (int i = 0; i < n_theta_; ++i)
      for (int j = 0; j < n_phi_; ++j) {
        double v = F(i, 0).real();
        for (int m = 1; m <= mmax_; ++m) v += 2.0 * (F(i, m) * expphi_(j, m)).real();
        f[i * n_phi_ + j] = v;
      }
    return f;
  }

  // point evaluation of a coefficient vector at arbitrary (c, phi)
  double evaluate(const Eigen::VectorXcd& coef, double c, double phi) const {
    check_coef(coef.size());
    std::vector<double> q;
    double v = 0.0;
    for (int m = 0; m <= mmax_; ++m) {
      legendre_column(c, m, q);
      Complex fm = 0.0;
      for (int l = m; l <= lmax_; ++l) fm += coef[coeff_index(l, m)] * q[l - m];
      if (m == 0)
        v += fm.real();
      else
        v += 2.0 * (fm * std::polar(1.0, m * phi)).real();
    }
    return v;
  }

  // multiply coefficients by g(l); g(0) applies to the mean mode
  Eigen::VectorXcd scale_by_l(const Eigen::VectorXcd& coef, const std::vector<double>& g) const {
    check_coef(coef.size());
    Eigen::VectorXcd out(coef.size());
    for (int m = 0; m <= mmax_; ++m)
      for (int l = m; l <= lmax_; ++l) out[coeff_index(l, m)] = g[l] * coef[coeff_index(l, m)];
    return out;
  }

  // spectral d/dc on the grid, via (1-c^2) q'_lm = s_lm q_{l-1,m} - l c q_lm
  Eigen::VectorXd deriv_c(const Eigen::VectorXcd& coef) const {
    check_coef(coef.size());
    Eigen::MatrixXcd F = Eigen::MatrixXcd::Zero(n_theta_, mmax_ + 1);
    for (int m = 0; m <= mmax_; ++m)
      for (int l = m; l <= lmax_; ++l) {
        const Complex a = coef[coeff_index(l, m)];
        if (a == 0.0) continue;
        for (int i = 0; i < n_theta_; ++i) {
          const double omc2 = 1.0 - c_[i] * c_[i];
          double dq = -l * c_[i] * qtab_[m](i, l - m);
          if (l > m) dq += slm(l, m) * qtab_[m](i, l - m - 1);
          F(i, m) += a * (dq / omc2);
        }
      }
    Eigen::VectorXd f(n_theta_ * n_phi_);
    for (int i = 0; i < n_theta_; ++i)
      for (int j = 0; j < n_phi_; ++j) {
        double v = F(i, 0).real();
        for (int m = 1; m <= mmax_; ++m) v += 2.0 * (F(i, m) * expphi_(j, m)).real();
        f[i * n_phi_ + j] = v;
      }
    return f;
  }

  // spectral d^2/dc^2 on the grid, from the recurrence for q' applied twice:
  // q'' = [s_l q'_{l-1} - l q_l - l c q'_l + 2 c (s_l q_{l-1} - l c q_l)/(1-c^2)]/(1-c^2)
  Eigen::VectorXd deriv_cc(const Eigen::VectorXcd& coef) const {
    check_coef(coef.size());
    Eigen::MatrixXcd F = Eigen::MatrixXcd::Zero(n_theta_, mmax_ + 1);
    std::vector<double> qp;  // q'_{lm} at one node, l = m..lmax
    for (int i = 0; i < n_theta_; ++i) {
      const double c = c_[i];
      const double omc2 = 1.0 - c * c;
      for (int m = 0; m <= mmax_; ++m) {
        qp.assign(lmax_ - m + 1, 0.0);
        for (int l = m; l <= lmax_; ++l) {
          double num = -l * c * qtab_[m](i, l - m);
          if (l > m) num += slm(l, m) * qtab_[m](i, l - m - 1);
          qp[l - m] = num / omc2;
        }
        for (int l = m; l <= lmax_; ++l) {
          const Complex a = coef[coeff_index(l, m)];
          if (a == 0.0) continue;
          double num = -l * qtab_[m](i, l - m) - l * c * qp[l - m] +
                       2.0 * c * qp[l - m];
          if (l > m) num += slm(l, m) * qp[l - m - 1];
          F(i, m) += a * (num / omc2);
        }
      }
    }
    Eigen::VectorXd f(n_theta_ * n_phi_);
    for (int i = 0; i < n_theta_; ++i)
      for (int j = 0; j < n_phi_; ++j) {
        double v = F(i, 0).real();
        for (int m = 1; m <= mmax_; ++m) v += 2.0 * (F(i, m) * expphi_(j, m)).real();
        f[i * n_phi_ + j] = v;
      }
    return f;
  }

  // spectral d/dphi on the grid
  Eigen::VectorXd deriv_phi(const Eigen::VectorXcd& coef) const {
    check_coef(coef.size());
    Eigen::VectorXcd dc(coef.size());
    for (int m = 0; m <= mmax_; ++m)
      for (int l = m; l <= lmax_; ++l)
        dc[coeff_index(l, m)] = Complex(0.0, m) * coef[coeff_index(l, m)];
    return synthesize(dc);
  }

  // q_lm(c) for fixed m, l = m..lmax (used for off-grid evaluation)
  void legendre_column(double c, int m, std::vector<double>& q) const {
    q.assign(lmax_ - m + 1, 0.0);
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    double qmm = 1.0;
    for (int k = 1; k <= m; ++k) qmm *= -s * std::sqrt((2.0 * k + 1.0) / (2.0 * k));
    q[0] = qmm;
    if (m + 1 <= lmax_) q[1] = std::sqrt(2.0 * m + 3.0) * c * qmm;
    for (int l = m + 2; l <= lmax_; ++l) {
      const double a = std::sqrt((4.0 * l * l - 1.0) / (double(l) * l - double(m) * m));
      const double b =
          std::sqrt((double(l - 1) * (l - 1) - double(m) * m) / (4.0 * double(l - 1) * (l - 1) - 1.0));
      q[l - m] = a * (c * q[l - m - 1] - b * q[l - m - 2]);
    }
  }

 private:
  static double slm(int l, int m) {
    return std::sqrt((double(l) * l - double(m) * m) * (2.0 * l + 1.0) / (2.0 * l - 1.0));
  }

  void build_tables() {
    if (n_theta_ < 2 || n_phi_ < 4) throw std::invalid_argument("SphereTransform: grid too small");
    qtab_.resize(mmax_ + 1);
    std::vector<double> q;
    for (int m = 0; m <= mmax_; ++m) {
      qtab_[m].resize(n_theta_, lmax_ - m + 1);
      for (int i = 0; i < n_theta_; ++i) {
        legendre_column(c_[i], m, q);
        for (int l = m; l <= lmax_; ++l) qtab_[m](i, l - m) = q[l - m];
      }
    }
    expphi_.resize(n_phi_, mmax_ + 1);
    for (int j = 0; j < n_phi_; ++j)
      for (int m = 0; m <= mmax_; ++m)
        expphi_(j, m) = std::polar(1.0, 2.0 * M_PI * j * m / n_phi_);
    offs_.assign(mmax_ + 2, 0);
    for (int m = 0; m <= mmax_; ++m) offs_[m + 1] = offs_[m] + (lmax_ - m + 1);
  }

  void check_size(Eigen::Index sz) const {
    if (sz != static_cast<Eigen::Index>(n_theta_) * n_phi_)
      throw std::invalid_argument("SphereTransform: field size mismatch");
  }
  void check_coef(Eigen::Index sz) const {
    if (sz != coeff_count()) throw std::invalid_argument("SphereTransform: coefficient size mismatch");
  }

  std::vector<double> c_;
  std::vector<double> rw_;
  int n_phi_, n_theta_, lmax_, mmax_;
  std::vector<Eigen::MatrixXd> qtab_;  // qtab_[m](i, l-m)
  Eigen::MatrixXcd expphi_;
  std::vector<int> offs_;
};

}  // namespace kmf
