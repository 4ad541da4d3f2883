#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace sawlab {

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

// Golub-Welsch: nodes are eigenvalues of the symmetric Jacobi matrix,
// weights mu0 * v_1^2 from the first eigenvector components.
inline GaussRule golub_welsch(const std::vector<double>& offdiag, double mu0) {
  const int n = static_cast<int>(offdiag.size()) + 1;
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    j(i, i + 1) = offdiag[i];
    j(i + 1, i) = offdiag[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  GaussRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    r.nodes[i] = es.eigenvalues()(i);
    const double v = es.eigenvectors()(0, i);
    r.weights[i] = mu0 * v * v;
  }
  return r;
}

}  // namespace detail

// Gauss-Legendre on [-1, 1].
inline GaussRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: order >= 1");
  std::vector<double> b(n - 1);
  for (int k = 1; k < n; ++k)
    b[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
  return detail::golub_welsch(b, 2.0);
}

// Gauss-Hermite for weight e^{-x^2} on the real line.
inline GaussRule gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: order >= 1");
  std::vector<double> b(n - 1);
  for (int k = 1; k < n; ++k) b[k - 1] = std::sqrt(0.5 * k);
  return detail::golub_welsch(b, std::sqrt(M_PI));
}

// Integrate f over [a, b] with a fixed panel count and rule order.
template <class Fn>
double integrate_panels(Fn&& f, double a, double b, int panels,
                        const GaussRule& rule) {
  const double h = (b - a) / panels;
  double total = 0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h, half = 0.5 * h;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
      total += rule.weights[i] * half * f(mid + half * rule.nodes[i]);
  }
  return total;
}

}  // namespace sawlab
