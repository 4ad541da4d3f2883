#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "sawlab/grassmann.hpp"
#include "sawlab/green.hpp"
#include "sawlab/lattice.hpp"

namespace sawlab {

// Couplings of the Gaussian split: the model (beta, gamma, nu) maps to
// (m^2, g0, gamma0, nu0, z0) with the z0/m^2 freedom deliberately exposed.
struct InitialCouplings {
  double m2 = 1.0;
  double g0 = 0;
  double gamma0 = 0;
  double nu0 = 0;
  double z0 = 0;

  static InitialCouplings from_model(double beta, double gamma, double nu,
                                     int d, double z0, double m2) {
    if (!(m2 > 0)) throw std::invalid_argument("couplings: m^2 must be > 0");
    if (!(z0 > -1)) throw std::invalid_argument("couplings: z0 must be > -1");
    if (!(gamma <= beta))
      throw std::invalid_argument("couplings: need gamma <= beta");
    InitialCouplings ic;
    const double s = (1.0 + z0) * (1.0 + z0);
    ic.m2 = m2;
    ic.z0 = z0;
    ic.g0 = (beta - gamma) * s;
    ic.nu0 = nu * (1.0 + z0) - m2;
    ic.gamma0 = gamma * s / (4.0 * d);
    return ic;
  }
};

// ------------------------------------------------------- model form builders

// Builders produce forms over the 2|Lambda| generators of a torus, with
// coefficients evaluated at a concrete boson configuration.
class ModelForms {
 public:
  ModelForms(const TorusSpec& spec) : spec_(spec) {
    const std::int64_t v = spec.volume();
    if (v > 3)
      throw std::invalid_argument("ModelForms: supported |Lambda| <= 3");
    volume_ = static_cast<int>(v);
    n_gens_ = 2 * volume_;
    lap_ = laplacian_matrix(spec);
  }

  int volume() const { return volume_; }
  int n_gens() const { return n_gens_; }
  const TorusSpec& spec() const { return spec_; }
  const Eigen::MatrixXd& laplacian() const { return lap_; }

  // tau_x = phi_x phibar_x + psi_x psibar_x
  Form tau(int x, const BosonConfig& cfg) const {
    Form f(n_gens_, cfg.phi[x] * cfg.phibar[x]);
    f[pair_mask(x, x)] = Complex(1);
    return f;
  }

  // tau_{Delta,x}: symmetrized Laplacian bilinear in both field types
  Form tau_delta(int x, const BosonConfig& cfg) const {
    Complex deg0(0);
    Form f(n_gens_);
    for (int y = 0; y < volume_; ++y) {
      const double w = -lap_(x, y);  // (-Delta)_{xy}
      if (w == 0.0) continue;
      deg0 += 0.5 * w * (cfg.phi[x] * cfg.phibar[y] +
                         cfg.phi[y] * cfg.phibar[x]);
      add_pair(f, x, y, 0.5 * w);
      add_pair(f, y, x, 0.5 * w);
    }
    f[0] += deg0;
    return f;
  }

  // |grad tau_x|^2 = sum_e (tau_{x+e} - tau_x)^2
  Form grad_tau_sq(int x, const BosonConfig& cfg) const {
    Form total(n_gens_);
    const Site sx = unflatten(x, spec_);
    for (int dir = 0; dir < 2 * spec_.d; ++dir) {
      const int y =
          static_cast<int>(flat_index(step(sx, dir, &spec_), spec_));
      Form diff = tau(y, cfg) - tau(x, cfg);
      total += wedge(diff, diff);
    }
    return total;
  }

  // U^-_x = 2 sum_e tau_x tau_{x+e}
  Form contact_monomial(int x, const BosonConfig& cfg) const {
    Form total(n_gens_);
    const Site sx = unflatten(x, spec_);
    const Form tx = tau(x, cfg);
    for (int dir = 0; dir < 2 * spec_.d; ++dir) {
      const int y =
          static_cast<int>(flat_index(step(sx, dir, &spec_), spec_));
      total += wedge(tx, tau(y, cfg));
    }
    total *= Complex(2);
    return total;
  }

  // V^+_{0,x} = g0 tau_x^2 + nu0 tau_x + z0 tau_{Delta,x}
  Form v_plus(int x, const InitialCouplings& ic, const BosonConfig& cfg) const {
    const Form tx = tau(x, cfg);
    Form f = wedge(tx, tx);
    f *= Complex(ic.g0);
    Form lin = tx;
    lin *= Complex(ic.nu0);
    f += lin;
    if (ic.z0 != 0.0) {
      Form td = tau_delta(x, cfg);
      td *= Complex(ic.z0);
      f += td;
    }
    return f;
  }

  // V^-_{0,x} = V^+_{0,x} + 4 d gamma0 tau_x^2
  Form v_minus(int x, const InitialCouplings& ic,
               const BosonConfig& cfg) const {
    Form f = v_plus(x, ic, cfg);
    const Form tx = tau(x, cfg);
    Form quad = wedge(tx, tx);
    quad *= Complex(4.0 * spec_.d * ic.gamma0);
    f += quad;
    return f;
  }

  // Z0 = exp(-sum_x (V^+_x + gamma0 |grad tau_x|^2)); even forms commute, so
  // the site product is the exp of the summed exponent.
  Form z0(const InitialCouplings& ic, const BosonConfig& cfg) const {
    Form expo(n_gens_);
    for (int x = 0; x < volume_; ++x) {
      expo += v_plus(x, ic, cfg);
      if (ic.gamma0 != 0.0) {
        Form u = grad_tau_sq(x, cfg);
        u *= Complex(ic.gamma0);
        expo += u;
      }
    }
    expo *= Complex(-1);
    return exp_form(expo);
  }

  // Z0 assembled through the minus-branch identity: exp(-(V^- + gamma0 U^-)).
  Form z0_minus_branch(const InitialCouplings& ic,
                       const BosonConfig& cfg) const {
    Form expo(n_gens_);
    for (int x = 0; x < volume_; ++x) {
      expo += v_minus(x, ic, cfg);
      Form u = contact_monomial(x, cfg);
      u *= Complex(-ic.gamma0);
      expo += u;
    }
    expo *= Complex(-1);
    return exp_form(expo);
  }

 private:
  std::uint32_t pair_mask(int x, int y) const {
    return (1u << generator_bit(x, false)) | (1u << generator_bit(y, true));
  }
  // add w * psi_x wedge psibar_y
  void add_pair(Form& f, int x, int y, double w) const {
    const std::uint32_t bx = 1u << generator_bit(x, false);
    const std::uint32_t by = 1u << generator_bit(y, true);
    f[bx | by] += w * static_cast<double>(detail::wedge_sign(bx, by));
  }

  TorusSpec spec_;
  int volume_ = 0;
  int n_gens_ = 0;
  Eigen::MatrixXd lap_;
};

// ------------------------------------------------------ polymer coordinates

// I_0^{+-}(X) and K_0^{+-}(X) over subsets X of Lambda, factorized over sites.
// The +/- branch follows the sign of gamma0.
class PolymerCoordinates {
 public:
  PolymerCoordinates(const ModelForms& forms, const InitialCouplings& ic)
      : forms_(forms), ic_(ic), plus_branch_(ic.gamma0 >= 0) {}

  bool plus_branch() const { return plus_branch_; }

  Form i_site(int x, const BosonConfig& cfg) const {
    Form v = plus_branch_ ? forms_.v_plus(x, ic_, cfg)
                          : forms_.v_minus(x, ic_, cfg);
    v *= Complex(-1);
    return exp_form(v);
  }

  Form k_site(int x, const BosonConfig& cfg) const {
    Form u = plus_branch_ ? forms_.grad_tau_sq(x, cfg)
                          : forms_.contact_monomial(x, cfg);
    u *= Complex(-std::abs(ic_.gamma0));
    Form j = exp_form(u);
    j -= Form(forms_.n_gens(), Complex(1));
    return wedge(i_site(x, cfg), j);
  }

  Form i_set(std::uint32_t sites, const BosonConfig& cfg) const {
    Form f(forms_.n_gens(), Complex(1));
    for (int x = 0; x < forms_.volume(); ++x)
      if (sites >> x & 1u) f = wedge(f, i_site(x, cfg));
    return f;
  }

  Form k_set(std::uint32_t sites, const BosonConfig& cfg) const {
    Form f(forms_.n_gens(), Complex(1));
    for (int x = 0; x < forms_.volume(); ++x)
      if (sites >> x & 1u) f = wedge(f, k_site(x, cfg));
    return f;
  }

  // max |Z0 - sum_X I(Lambda \ X) K(X)| over coefficients at this config
  double circle_product_residual(const BosonConfig& cfg) const {
    Form z = plus_branch_ ? forms_.z0(ic_, cfg)
                          : forms_.z0_minus_branch(ic_, cfg);
    Form sum(forms_.n_gens());
    const std::uint32_t full = (1u << forms_.volume()) - 1u;
    for (std::uint32_t x = 0; x <= full; ++x)
      sum += wedge(i_set(full & ~x, cfg), k_set(x, cfg));
    return (z - sum).max_abs();
  }

 private:
  const ModelForms& forms_;
  InitialCouplings ic_;
  bool plus_branch_;
};

// ------------------------------------------------------ integral identities

struct SusyTwoPoint {
  double value = 0;
  double imag_residue = 0;
};

// Quadrature reference matched to the full quadratic part of the integrand,
// (1+z0)(-Delta + nu): keeps the node placement independent of the (m2, z0)
// split and carries the m^2/nu0 cancellation exactly.
inline Eigen::MatrixXd reference_covariance(const TorusSpec& spec, double nu,
                                            double z0, double m2) {
  if (nu > 0) return green_matrix(spec, nu) / (1.0 + z0);
  return green_matrix(spec, m2);
}

// G_N(a,b) = (1+z0) E_C(Z0 phibar_a phi_b) by quadrature.
inline SusyTwoPoint two_point_susy(double beta, double gamma, double nu,
                                   const TorusSpec& spec, int a, int b,
                                   double z0, double m2, int order) {
  InitialCouplings ic =
      InitialCouplings::from_model(beta, gamma, nu, spec.d, z0, m2);
  ModelForms forms(spec);
  Eigen::MatrixXd c = green_matrix(spec, m2);
  Eigen::MatrixXd cref = reference_covariance(spec, nu, z0, m2);
  SuperQuadrature quad(c, order, &cref);
  auto z0_eval = [&](const BosonConfig& cfg) { return forms.z0(ic, cfg); };
  auto vals = quad.expectation_multi(
      z0_eval, {[&](const BosonConfig& cfg) {
        return cfg.phibar[a] * cfg.phi[b];
      }});
  const Complex g = (1.0 + z0) * vals[0];
  return {g.real(), std::abs(g.imag())};
}

// Whole row G_N(a, .) from one sweep.
inline std::vector<SusyTwoPoint> two_point_susy_row(
    double beta, double gamma, double nu, const TorusSpec& spec, int a,
    double z0, double m2, int order) {
  InitialCouplings ic =
      InitialCouplings::from_model(beta, gamma, nu, spec.d, z0, m2);
  ModelForms forms(spec);
  Eigen::MatrixXd c = green_matrix(spec, m2);
  Eigen::MatrixXd cref = reference_covariance(spec, nu, z0, m2);
  SuperQuadrature quad(c, order, &cref);
  auto z0_eval = [&](const BosonConfig& cfg) { return forms.z0(ic, cfg); };
  std::vector<std::function<Complex(const BosonConfig&)>> scalars;
  for (int b = 0; b < forms.volume(); ++b)
    scalars.push_back([a, b](const BosonConfig& cfg) {
      return cfg.phibar[a] * cfg.phi[b];
    });
  auto vals = quad.expectation_multi(z0_eval, scalars);
  std::vector<SusyTwoPoint> out;
  for (const Complex& g : vals)
    out.push_back({((1.0 + z0) * g).real(), std::abs(((1.0 + z0) * g).imag())});
  return out;
}

// Z_{N,0}(s,t): degree-0 part of E_C theta Z0 at external phi = s*1,
// phibar = t*1, external fermions zero. Because the external fermions vanish,
// this is a plain super-expectation at shifted boson arguments.
inline Complex z_n_empty(const InitialCouplings& ic, const TorusSpec& spec,
                         int order, double s, double t) {
  ModelForms forms(spec);
  Eigen::MatrixXd c = green_matrix(spec, ic.m2);
  const double nu = (ic.nu0 + ic.m2) / (1.0 + ic.z0);
  Eigen::MatrixXd cref = reference_covariance(spec, nu, ic.z0, ic.m2);
  SuperQuadrature quad(c, order, &cref);
  std::vector<Complex> sphi(forms.volume(), Complex(s));
  std::vector<Complex> sphibar(forms.volume(), Complex(t));
  auto z0_eval = [&](const BosonConfig& cfg) { return forms.z0(ic, cfg); };
  auto vals = quad.expectation_multi(
      z0_eval, {[](const BosonConfig&) { return Complex(1); }}, &sphi,
      &sphibar);
  return vals[0];
}

struct ChiHatResult {
  double chi_hat = 0;
  double d2 = 0;           // central-difference D^2, Richardson extrapolated
  double fd_error_est = 0; // |richardson - coarse| as an error gauge
};

// chi_hat_N = 1/m^2 + (1/m^4) (1/|Lambda|) D^2 Z_{N,0}(0,0; 1,1).
inline ChiHatResult chi_hat_susy(double beta, double gamma, double nu,
                                 const TorusSpec& spec, double z0, double m2,
                                 int order, double fd_step = 1e-3) {
  InitialCouplings ic =
      InitialCouplings::from_model(beta, gamma, nu, spec.d, z0, m2);
  auto d2_at = [&](double h) {
    const Complex pp = z_n_empty(ic, spec, order, h, h);
    const Complex pm = z_n_empty(ic, spec, order, h, -h);
    const Complex mp = z_n_empty(ic, spec, order, -h, h);
    const Complex mm = z_n_empty(ic, spec, order, -h, -h);
    return ((pp - pm - mp + mm) / (4.0 * h * h)).real();
  };
  const double coarse = d2_at(fd_step);
  const double fine = d2_at(fd_step / 2.0);
  const double d2 = (4.0 * fine - coarse) / 3.0;  // one Richardson step
  ChiHatResult r;
  r.d2 = d2;
  r.fd_error_est = std::abs(d2 - fine);
  const double vol = static_cast<double>(spec.volume());
  r.chi_hat = 1.0 / m2 + d2 / (m2 * m2 * vol);
  return r;
}

}  // namespace sawlab
