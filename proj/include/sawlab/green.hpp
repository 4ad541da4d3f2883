#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sawlab/gauss.hpp"
#include "sawlab/lattice.hpp"

namespace sawlab {

// Dense torus Laplacian with entries 1_{x~y} - 2d 1_{x=y}; neighbour
// multiplicities are kept, so n = 1 and n = 2 behave correctly.
inline Eigen::MatrixXd laplacian_matrix(const TorusSpec& spec) {
  const std::int64_t v = spec.volume();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(v, v);
  for (std::int64_t i = 0; i < v; ++i) {
    const Site x = unflatten(i, spec);
    m(i, i) -= 2.0 * spec.d;
    for (int dir = 0; dir < 2 * spec.d; ++dir)
      m(i, flat_index(step(x, dir, &spec), spec)) += 1.0;
  }
  return m;
}

namespace detail {

// Fourier eigenvalue of -Delta at mode k (components in [0,n)).
inline double torus_mode_eigenvalue(const Site& k, const TorusSpec& spec) {
  double lam = 0;
  for (int i = 0; i < spec.d; ++i)
    lam += 2.0 * (1.0 - std::cos(2.0 * M_PI * k.c[i] / spec.n));
  return lam;
}

}  // namespace detail

// Column x -> C(0,x) of C = (-Delta + m^2)^{-1}. Spectral for n >= 8 (exact
// translation-invariant eigenbasis), dense solve below.
inline std::vector<double> green_column(const TorusSpec& spec, double m2) {
  if (!(m2 > 0.0))
    throw std::invalid_argument("green: m^2 must be positive (zero mode)");
  const std::int64_t v = spec.volume();
  std::vector<double> col(v, 0.0);
  if (spec.n >= 8) {
    for (std::int64_t ik = 0; ik < v; ++ik) {
      const Site k = unflatten(ik, spec);
      const double w = 1.0 / (detail::torus_mode_eigenvalue(k, spec) + m2);
      for (std::int64_t ix = 0; ix < v; ++ix) {
        const Site x = unflatten(ix, spec);
        double phase = 0;
        for (int i = 0; i < spec.d; ++i)
          phase += 2.0 * M_PI * k.c[i] * x.c[i] / spec.n;
        col[ix] += w * std::cos(phase);
      }
    }
    for (auto& c : col) c /= static_cast<double>(v);
  } else {
    Eigen::MatrixXd a =
        -laplacian_matrix(spec) + m2 * Eigen::MatrixXd::Identity(v, v);
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(v);
    e0(0) = 1.0;
    Eigen::VectorXd g = a.ldlt().solve(e0);
    for (std::int64_t i = 0; i < v; ++i) col[i] = g(i);
  }
  return col;
}

inline Eigen::MatrixXd green_matrix(const TorusSpec& spec, double m2) {
  if (!(m2 > 0.0))
    throw std::invalid_argument("green: m^2 must be positive (zero mode)");
  const std::int64_t v = spec.volume();
  if (spec.n >= 8) {
    // Translation invariance: fill from the origin column.
    std::vector<double> col = green_column(spec, m2);
    Eigen::MatrixXd g(v, v);
    for (std::int64_t i = 0; i < v; ++i) {
      const Site xi = unflatten(i, spec);
      for (std::int64_t j = 0; j < v; ++j) {
        Site diff = unflatten(j, spec);
        for (int k = 0; k < spec.d; ++k)
          diff.c[k] = mod_euclid(diff.c[k] - xi.c[k], spec.n);
        g(i, j) = col[flat_index(diff, spec)];
      }
    }
    return g;
  }
  Eigen::MatrixXd a =
      -laplacian_matrix(spec) + m2 * Eigen::MatrixXd::Identity(v, v);
  return a.inverse();
}

namespace detail {

// e^{-z} I_0(z) for z >= 0 without overflow; series for small z, the
// standard asymptotic expansion for large z.
inline double scaled_bessel_i0(double z) {
  if (z < 40.0) {
    double term = 1.0, sum = 1.0;
    const double q = z * z / 4.0;
    for (int k = 1; k < 200; ++k) {
      term *= q / (static_cast<double>(k) * k);
      sum += term;
      if (term < 1e-18 * sum) break;
    }
    return std::exp(-z) * sum;
  }
  double sum = 1.0, term = 1.0;
  for (int k = 1; k <= 12; ++k) {
    term *= (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * z * k);
    sum += term;
  }
  return sum / std::sqrt(2.0 * M_PI * z);
}

}  // namespace detail

// (-Delta_{Z^d})^{-1}_{00} for d >= 3, i.e. the momentum integral
// (2pi)^{-d} int dk / (2 sum_i (1 - cos k_i)), evaluated through its exact
// one-dimensional heat-kernel reduction int_0^inf [e^{-2t} I_0(2t)]^d dt.
inline double green_at_origin_zd(int d) {
  if (d <= 2)
    throw std::invalid_argument(
        "green_at_origin_zd: integral diverges for d <= 2");
  auto f = [&](double t) {
    return std::pow(detail::scaled_bessel_i0(2.0 * t), d);
  };
  // Panelled Gauss-Legendre on [0, A]; the remainder decays like t^{-d/2}
  // and is summed from the asymptotic expansion of the integrand.
  const double A = 600.0;
  static const GaussRule rule = gauss_legendre(32);
  double total = integrate_panels(f, 0.0, A, 600, rule);
  // Tail: integrand ~ (4 pi t)^{-d/2} (1 + d/(16 t) + ...); first two terms.
  const double c = std::pow(4.0 * M_PI, -0.5 * d);
  const double p1 = 0.5 * d;
  total += c * std::pow(A, 1.0 - p1) / (p1 - 1.0);
  total += c * (d / 16.0) * std::pow(A, -p1) / p1;
  return total;
}

}  // namespace sawlab
