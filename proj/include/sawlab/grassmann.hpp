#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sawlab/gauss.hpp"
#include "sawlab/lattice.hpp"
#include "sawlab/rng.hpp"

namespace sawlab {

using Complex = std::complex<double>;

// Boson field values: phi and phibar are carried independently because the
// external-field machinery evaluates them off the conjugation locus.
struct BosonConfig {
  std::vector<Complex> phi, phibar;

  bool operator==(const BosonConfig& o) const {
    return phi == o.phi && phibar == o.phibar;
  }
};

struct GeneratorIndex {
  int site = 0;
  bool barred = false;
};

// Canonical generator order: site-major, unbarred before barred.
inline int generator_bit(int site, bool barred) { return 2 * site + (barred ? 1 : 0); }

// ------------------------------------------------------------------ forms

// Element of the exterior algebra over n_gens generators, coefficients in C
// (numbers: the boson dependence lives in whoever evaluated them). Monomials
// are bitmasks, wedge-ordered by increasing bit.
class Form {
 public:
  Form() = default;
  explicit Form(int n_gens, Complex constant = Complex(0))
      : n_(n_gens), c_(std::size_t{1} << n_gens, Complex(0)) {
    if (n_gens < 0 || n_gens > 16)
      throw std::invalid_argument("Form: unsupported generator count");
    if (!c_.empty()) c_[0] = constant;
  }

  static Form generator(int n_gens, int bit) {
    Form f(n_gens);
    f.c_[std::size_t{1} << bit] = Complex(1);
    return f;
  }

  int n_gens() const { return n_; }
  std::size_t size() const { return c_.size(); }
  Complex operator[](std::uint32_t mask) const { return c_[mask]; }
  Complex& operator[](std::uint32_t mask) { return c_[mask]; }
  Complex degree0() const { return c_[0]; }

  bool is_even() const {
    for (std::size_t m = 0; m < c_.size(); ++m)
      if ((std::popcount(static_cast<std::uint32_t>(m)) & 1) &&
          c_[m] != Complex(0))
        return false;
    return true;
  }

  Form& operator+=(const Form& o) {
    check_space(o);
    for (std::size_t m = 0; m < c_.size(); ++m) c_[m] += o.c_[m];
    return *this;
  }
  Form& operator-=(const Form& o) {
    check_space(o);
    for (std::size_t m = 0; m < c_.size(); ++m) c_[m] -= o.c_[m];
    return *this;
  }
  Form& operator*=(Complex s) {
    for (auto& v : c_) v *= s;
    return *this;
  }
  friend Form operator+(Form a, const Form& b) { return a += b; }
  friend Form operator-(Form a, const Form& b) { return a -= b; }
  friend Form operator*(Complex s, Form f) { return f *= s; }

  double max_abs() const {
    double m = 0;
    for (const auto& v : c_) m = std::max(m, std::abs(v));
    return m;
  }

  // Optional boson-config tag for user-facing algebra.
  const std::optional<BosonConfig>& config() const { return config_; }
  void set_config(BosonConfig cfg) { config_ = std::move(cfg); }

 private:
  void check_space(const Form& o) const {
    if (n_ != o.n_) throw std::invalid_argument("Form: space mismatch");
  }

  int n_ = 0;
  std::vector<Complex> c_;
  std::optional<BosonConfig> config_;
};

namespace detail {

// Parity of the permutation that merges bit-ascending monomials a and b.
inline int wedge_sign(std::uint32_t a, std::uint32_t b) {
  int swaps = 0;
  while (b) {
    const int j = std::countr_zero(b);
    swaps += std::popcount(a >> (j + 1));
    b &= b - 1;
  }
  return (swaps & 1) ? -1 : 1;
}

}  // namespace detail

inline Form wedge(const Form& f, const Form& g) {
  if (f.n_gens() != g.n_gens())
    throw std::invalid_argument("wedge: generator spaces differ");
  if (f.config() && g.config() && !(*f.config() == *g.config()))
    throw std::invalid_argument("wedge: boson configs differ");
  Form out(f.n_gens());
  const std::uint32_t full =
      static_cast<std::uint32_t>(f.size() - 1);
  for (std::uint32_t m = 0; m <= full; ++m) {
    // iterate a over submasks of m, b = m \ a
    Complex acc(0);
    std::uint32_t a = m;
    for (;;) {
      const std::uint32_t b = m & ~a;
      const Complex fa = f[a];
      if (fa != Complex(0)) {
        const Complex gb = g[b];
        if (gb != Complex(0))
          acc += static_cast<double>(detail::wedge_sign(a, b)) * fa * gb;
      }
      if (a == 0) break;
      a = (a - 1) & m;
    }
    out[m] = acc;
  }
  if (f.config())
    out.set_config(*f.config());
  else if (g.config())
    out.set_config(*g.config());
  return out;
}

// f applied to an even form by Taylor expansion about the degree-0 part;
// derivs[k] must supply f^{(k)} evaluated at F_degree0, k = 0..n_gens/2.
inline Form apply_smooth_function(const std::vector<Complex>& derivs,
                                  const Form& f) {
  if (!f.is_even())
    throw std::invalid_argument("apply_smooth_function: form must be even");
  Form nil = f;
  nil[0] = Complex(0);
  const int kmax = f.n_gens() / 2;
  if (static_cast<int>(derivs.size()) < kmax + 1)
    throw std::invalid_argument("apply_smooth_function: need more derivatives");
  Form out(f.n_gens(), derivs[0]);
  Form power(f.n_gens(), Complex(1));
  double fact = 1;
  for (int k = 1; k <= kmax; ++k) {
    power = wedge(power, nil);
    fact *= k;
    if (power.max_abs() == 0.0) break;
    Form term = power;
    term *= derivs[static_cast<std::size_t>(k)] / fact;
    out += term;
  }
  if (f.config()) out.set_config(*f.config());
  return out;
}

// exp of an even form: the nilpotent series terminates.
inline Form exp_form(const Form& f) {
  const int kmax = f.n_gens() / 2;
  std::vector<Complex> derivs(static_cast<std::size_t>(kmax) + 1,
                              std::exp(f.degree0()));
  return apply_smooth_function(derivs, f);
}

// Coefficient of the full product of all generators in canonical order.
inline Complex berezin_top(const Form& f) {
  return f[static_cast<std::uint32_t>(f.size() - 1)];
}

// --------------------------------------------------------- super-expectation

// Gauss-Hermite quadrature in the eigenbasis of A = C^{-1}, one complex boson
// pair per site, fermionic Gaussian handled exactly through the exterior
// algebra. Supported lattice sizes |Lambda| <= 3 (six real dimensions).
class SuperQuadrature {
 public:
  // The optional reference covariance supplies the quadrature Gaussian; the
  // mismatch e^{-xi (A - A_ref) xibar} is reweighted into the integrand. A
  // reference matched to the full quadratic part of the integrand keeps the
  // node count flat across equivalent (m^2, z0) splits.
  SuperQuadrature(const Eigen::MatrixXd& covariance, int order,
                  const Eigen::MatrixXd* reference = nullptr)
      : n_(static_cast<int>(covariance.rows())), order_(order) {
    if (n_ < 1 || n_ > 3)
      throw std::invalid_argument(
          "SuperQuadrature: supported lattice sizes are 1..3 sites");
    if (order < 1) throw std::invalid_argument("SuperQuadrature: order >= 1");
    if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw std::invalid_argument("SuperQuadrature: covariance not symmetric");
    c_ = 0.5 * (covariance + covariance.transpose());
    a_ = inverse_spd(c_, "SuperQuadrature: covariance not positive definite");
    const Eigen::MatrixXd cref = reference ? *reference : c_;
    Eigen::MatrixXd aref =
        inverse_spd(cref, "SuperQuadrature: reference not positive definite");
    a_diff_ = a_ - aref;
    // whitening u = T y sends u.A_ref u to |y|^2
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cref);
    Eigen::VectorXd lam = es.eigenvalues();
    jacobian_ = 1.0;
    for (int i = 0; i < n_; ++i) jacobian_ *= lam(i);
    transform_ = es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
    rule_ = gauss_hermite(order);
    fermi_gauss_ = build_fermi_gauss(a_, 0);
  }

  int sites() const { return n_; }
  int order() const { return order_; }
  const Eigen::MatrixXd& covariance() const { return c_; }
  const Eigen::MatrixXd& inverse() const { return a_; }

  // E_C F with F supplied pointwise in the boson field.
  Complex expectation(
      const std::function<Form(const BosonConfig&)>& evaluate) const {
    auto weights = expectation_multi(
        evaluate, {[](const BosonConfig&) { return Complex(1); }});
    return weights[0];
  }

  // Shared sweep: E_C[F * s_j(phi)] for scalar weights s_j. The fermionic
  // content comes from F alone.
  std::vector<Complex> expectation_multi(
      const std::function<Form(const BosonConfig&)>& evaluate,
      const std::vector<std::function<Complex(const BosonConfig&)>>& scalars,
      const std::vector<Complex>* shift_phi = nullptr,
      const std::vector<Complex>* shift_phibar = nullptr) const {
    std::vector<Complex> out(scalars.size(), Complex(0));
    BosonConfig cfg;
    cfg.phi.resize(n_);
    cfg.phibar.resize(n_);
    for_each_node([&](const std::vector<Complex>& xi, double w) {
      w *= reweight(xi);
      for (int i = 0; i < n_; ++i) {
        cfg.phi[i] = xi[i] + (shift_phi ? (*shift_phi)[i] : Complex(0));
        cfg.phibar[i] = std::conj(xi[i]) +
                        (shift_phibar ? (*shift_phibar)[i] : Complex(0));
      }
      const Form f = evaluate(cfg);
      const Complex top = berezin_top(wedge(fermi_gauss_, f));
      for (std::size_t j = 0; j < scalars.size(); ++j)
        out[j] += w * top * scalars[j](cfg);
    });
    const double pref = jacobian_ * std::pow(-1.0 / M_PI, n_);
    for (auto& v : out) v *= pref;
    return out;
  }

  // E_C theta F as a form in the external fermions, evaluated at an external
  // boson field. The evaluator receives the shifted configuration and returns
  // a form over the base generators; those are substituted psi -> psi + eta
  // and the eta block is integrated out.
  Form expectation_theta(
      const std::function<Form(const BosonConfig&)>& evaluate,
      const BosonConfig& external) const {
    const int nb = 2 * n_;  // base generators
    Form out(nb);
    Form fermi_int = build_fermi_gauss(a_, nb);  // internal block of 2*nb gens
    BosonConfig cfg;
    cfg.phi.resize(n_);
    cfg.phibar.resize(n_);
    for_each_node([&](const std::vector<Complex>& xi, double w) {
      w *= reweight(xi);
      for (int i = 0; i < n_; ++i) {
        cfg.phi[i] = external.phi[i] + xi[i];
        cfg.phibar[i] = external.phibar[i] + std::conj(xi[i]);
      }
      Form base = evaluate(cfg);
      Form doubled = theta_substitute(base, nb);
      Form integrand = wedge(fermi_int, doubled);
      // keep terms with the full internal block; they carry no extra sign
      // because internal bits sit above all external bits
      const std::uint32_t int_full = ((1u << nb) - 1u) << nb;
      for (std::uint32_t ext = 0; ext < (1u << nb); ++ext)
        out[ext] += w * integrand[ext | int_full];
    });
    const double pref = jacobian_ * std::pow(-1.0 / M_PI, n_);
    out *= pref;
    return out;
  }

  // Monte Carlo fallback with Gaussian proposals (for the 6-dimensional case
  // where a fine tensor grid is too expensive).
  Complex expectation_mc(
      const std::function<Form(const BosonConfig&)>& evaluate, long samples,
      std::uint64_t seed) const {
    BosonConfig cfg;
    cfg.phi.resize(n_);
    cfg.phibar.resize(n_);
    Complex acc(0);
    RngStream rng(seed, 0);
    std::vector<Complex> xi(n_);
    for (long s = 0; s < samples; ++s) {
      Eigen::VectorXd y(n_), z(n_);
      for (int i = 0; i < n_; ++i) {
        y(i) = normal(rng) * M_SQRT1_2;
        z(i) = normal(rng) * M_SQRT1_2;
      }
      Eigen::VectorXd u = transform_ * y, v = transform_ * z;
      for (int i = 0; i < n_; ++i) {
        xi[i] = Complex(u(i), v(i));
        cfg.phi[i] = xi[i];
        cfg.phibar[i] = std::conj(xi[i]);
      }
      acc += reweight(xi) * berezin_top(wedge(fermi_gauss_, evaluate(cfg)));
    }
    acc /= static_cast<double>(samples);
    // (-1/pi)^n * det(C_ref) * pi^n, proposal normalization folded in
    return acc * std::pow(-1.0, n_) * jacobian_;
  }

  // theta substitution: base generator bit k maps to ext_k + int_k in a
  // doubled space with external bits [0, nb) and internal bits [nb, 2nb).
  static Form theta_substitute(const Form& base, int nb) {
    Form out(2 * nb);
    for (std::uint32_t mask = 0; mask < base.size(); ++mask) {
      const Complex coeff = base[mask];
      if (coeff == Complex(0)) continue;
      Form term(2 * nb, coeff);
      for (int k = 0; k < nb; ++k) {
        if (!(mask >> k & 1u)) continue;
        Form pair(2 * nb);
        pair[1u << k] = Complex(1);
        pair[1u << (nb + k)] = Complex(1);
        term = wedge(term, pair);
      }
      out += term;
    }
    return out;
  }

 private:
  static double normal(RngStream& rng) {
    // Box-Muller
    const double u1 = rng.next_unit(), u2 = rng.next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  static Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& m,
                                     const char* msg) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        0.5 * (m + m.transpose()));
    const double lam_min = es.eigenvalues().minCoeff();
    const double lam_max = es.eigenvalues().maxCoeff();
    if (!(lam_min > 1e-12 * std::max(lam_max, 1.0)))
      throw std::invalid_argument(msg);
    Eigen::MatrixXd inv = es.eigenvectors() *
                          es.eigenvalues().cwiseInverse().asDiagonal() *
                          es.eigenvectors().transpose();
    return 0.5 * (inv + inv.transpose());
  }

  // e^{-xi (A - A_ref) xibar} at the raw node
  double reweight(const std::vector<Complex>& xi) const {
    if (a_diff_.cwiseAbs().maxCoeff() == 0.0) return 1.0;
    double q = 0;
    for (int x = 0; x < n_; ++x)
      for (int y = 0; y < n_; ++y)
        q += a_diff_(x, y) * (xi[x] * std::conj(xi[y])).real();
    return std::exp(-q);
  }

  // exp(-sum_xy A_xy psi_x wedge psibar_y), generators offset into a larger
  // space when requested.
  static Form build_fermi_gauss(const Eigen::MatrixXd& a, int offset) {
    const int n = static_cast<int>(a.rows());
    const int total = offset == 0 ? 2 * n : 2 * offset;
    Form s(total);
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y) {
        if (a(x, y) == 0.0) continue;
        const int bx = offset + generator_bit(x, false);
        const int by = offset + generator_bit(y, true);
        const std::uint32_t m = (1u << bx) | (1u << by);
        s[m] += -a(x, y) * static_cast<double>(
                               detail::wedge_sign(1u << bx, 1u << by));
      }
    return exp_form(s);
  }

  template <class Fn>
  void for_each_node(Fn&& fn) const {
    const int dims = 2 * n_;
    std::vector<int> idx(dims, 0);
    std::vector<Complex> xi(n_);
    Eigen::VectorXd y(n_), z(n_);
    for (;;) {
      double w = 1;
      for (int i = 0; i < n_; ++i) {
        y(i) = rule_.nodes[idx[i]];
        z(i) = rule_.nodes[idx[n_ + i]];
        w *= rule_.weights[idx[i]] * rule_.weights[idx[n_ + i]];
      }
      Eigen::VectorXd u = transform_ * y, v = transform_ * z;
      for (int i = 0; i < n_; ++i) xi[i] = Complex(u(i), v(i));
      fn(xi, w);
      int k = 0;
      while (k < dims && ++idx[k] == order_) idx[k++] = 0;
      if (k == dims) break;
    }
  }

  int n_;
  int order_;
  Eigen::MatrixXd c_, a_, a_diff_, transform_;
  double jacobian_;
  GaussRule rule_;
  Form fermi_gauss_;
};

// Convolution property E_C theta = E_{C2} theta after E_{C1} theta, compared
// coefficientwise at a set of external boson points.
struct ConvolutionReport {
  double max_abs_diff = 0;
  int points = 0;
};

inline ConvolutionReport convolution_property_check(
    const Eigen::MatrixXd& c1, const Eigen::MatrixXd& c2, int order,
    const std::function<Form(const BosonConfig&)>& evaluate,
    const std::vector<BosonConfig>& externals) {
  SuperQuadrature full(c1 + c2, order), q1(c1, order), q2(c2, order);
  ConvolutionReport rep;
  for (const BosonConfig& ext : externals) {
    Form lhs = full.expectation_theta(evaluate, ext);
    auto inner = [&](const BosonConfig& mid) {
      return q1.expectation_theta(evaluate, mid);
    };
    Form rhs = q2.expectation_theta(inner, ext);
    Form diff = lhs - rhs;
    rep.max_abs_diff = std::max(rep.max_abs_diff, diff.max_abs());
    ++rep.points;
  }
  return rep;
}

}  // namespace sawlab
