#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "sawlab/energy.hpp"
#include "sawlab/observables.hpp"
#include "sawlab/susy.hpp"

using namespace sawlab;

namespace {

BosonConfig random_config(int sites, RngStream& rng) {
  BosonConfig cfg;
  for (int i = 0; i < sites; ++i) {
    const Complex phi(2.0 * rng.next_unit() - 1.0, 2.0 * rng.next_unit() - 1.0);
    cfg.phi.push_back(phi);
    cfg.phibar.push_back(std::conj(phi));
  }
  return cfg;
}

}  // namespace

TEST_CASE("coupling relations") {
  InitialCouplings ic = InitialCouplings::from_model(0.3, 0.1, 0.5, 2, 0.25, 0.7);
  const double s = 1.25 * 1.25;
  CHECK(ic.g0 == Catch::Approx(0.2 * s));
  CHECK(ic.nu0 == Catch::Approx(0.5 * 1.25 - 0.7));
  CHECK(ic.gamma0 == Catch::Approx(0.1 * s / 8.0));

  CHECK_THROWS(InitialCouplings::from_model(0.3, 0.1, 0.5, 2, -1.0, 0.7));
  CHECK_THROWS(InitialCouplings::from_model(0.3, 0.1, 0.5, 2, 0.0, 0.0));
  CHECK_THROWS(InitialCouplings::from_model(0.3, 0.4, 0.5, 2, 0.0, 0.7));
}

TEST_CASE("Z0 with trivial couplings is the unit form") {
  TorusSpec t = make_torus(1, 2);
  ModelForms forms(t);
  InitialCouplings ic;  // all couplings zero, m2 = 1
  ic.g0 = ic.gamma0 = ic.nu0 = ic.z0 = 0;
  RngStream rng(1, 0);
  BosonConfig cfg = random_config(2, rng);
  Form z = forms.z0(ic, cfg);
  CHECK(std::abs(z[0] - Complex(1)) <= 1e-14);
  Form unit(forms.n_gens(), Complex(1));
  CHECK((z - unit).max_abs() <= 1e-14);
}

TEST_CASE("plus and minus branch assemble the same Z0") {
  TorusSpec t = make_torus(1, 2);
  ModelForms forms(t);
  RngStream rng(7, 1);
  for (double gamma0 : {0.05, -0.05}) {
    InitialCouplings ic;
    ic.g0 = 0.2;
    ic.nu0 = -0.1;
    ic.z0 = 0.1;
    ic.gamma0 = gamma0;
    for (int rep = 0; rep < 10; ++rep) {
      BosonConfig cfg = random_config(2, rng);
      Form a = forms.z0(ic, cfg);
      Form b = forms.z0_minus_branch(ic, cfg);
      CHECK((a - b).max_abs() <= 1e-12 * (1.0 + a.max_abs()));
    }
  }
}

TEST_CASE("Z0 degree-0 part matches the energy module on |phi|^2") {
  TorusSpec t = make_torus(1, 3);
  ModelForms forms(t);
  InitialCouplings ic;
  ic.g0 = 0.25;
  ic.nu0 = 0.15;
  ic.gamma0 = 0.04;
  ic.z0 = 0.3;
  RngStream rng(9, 2);
  for (int rep = 0; rep < 5; ++rep) {
    // real boson field so that tau-degree-0 reductions are real
    BosonConfig cfg;
    FieldVector f(t), phi(t);
    for (int x = 0; x < 3; ++x) {
      const double v = 2.0 * rng.next_unit() - 1.0;
      cfg.phi.push_back(Complex(v));
      cfg.phibar.push_back(Complex(v));
      phi.set(make_site({x}), v);
      f.set(make_site({x}), v * v);
    }
    const double quart = ic.g0 * intersection_local_time(f);
    const double lin = ic.nu0 * f.sum();
    const double grad = ic.gamma0 * gradient_norm_sq(f, 1);
    FieldVector lap = laplacian_apply(phi, 1);
    const double kin = ic.z0 * (-field_dot(phi, lap));
    const double expected = std::exp(-(quart + lin + grad + kin));
    Form z = forms.z0(ic, cfg);
    CHECK(std::abs(z[0] - Complex(expected)) <= 1e-12 * (1.0 + expected));
  }
}

TEST_CASE("polymer gas representation") {
  TorusSpec t = make_torus(1, 2);
  ModelForms forms(t);
  RngStream rng(4, 3);

  // gamma0 = 0: K vanishes and the sum collapses to I(Lambda)
  {
    InitialCouplings ic;
    ic.g0 = 0.2;
    ic.nu0 = 0.05;
    PolymerCoordinates pc(forms, ic);
    BosonConfig cfg = random_config(2, rng);
    CHECK(pc.k_site(0, cfg).max_abs() <= 1e-15);
    CHECK(pc.circle_product_residual(cfg) <= 1e-13);
  }

  for (double gamma0 : {0.05, -0.05}) {
    InitialCouplings ic;
    ic.g0 = 0.2;
    ic.nu0 = 0.05;
    ic.z0 = 0.1;
    ic.gamma0 = gamma0;
    PolymerCoordinates pc(forms, ic);
    CHECK(pc.plus_branch() == (gamma0 >= 0));
    for (int rep = 0; rep < 20; ++rep) {
      BosonConfig cfg = random_config(2, rng);
      CHECK(pc.circle_product_residual(cfg) <= 1e-12);
    }
  }

  // factorization over singletons: K(X) = prod K_x
  {
    InitialCouplings ic;
    ic.g0 = 0.15;
    ic.gamma0 = 0.03;
    PolymerCoordinates pc(forms, ic);
    BosonConfig cfg = random_config(2, rng);
    Form k01 = pc.k_set(0b11, cfg);
    Form prod = wedge(pc.k_site(0, cfg), pc.k_site(1, cfg));
    CHECK((k01 - prod).max_abs() <= 1e-14);
  }
}

TEST_CASE("free theory equals the matrix oracle for any mass split") {
  TorusSpec t = make_torus(1, 2);
  Eigen::MatrixXd op =
      -laplacian_matrix(t) + 0.5 * Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd g = op.inverse();
  for (double m2 : {0.3, 0.5, 1.0}) {
    auto row = two_point_susy_row(0.0, 0.0, 0.5, t, 0, 0.0, m2, 24);
    CHECK(std::abs(row[0].value - g(0, 0)) <= 1e-8);
    CHECK(std::abs(row[1].value - g(0, 1)) <= 1e-8);
    CHECK(row[0].imag_residue <= 1e-10);
  }
}

TEST_CASE("gauge freedom: z0 and m2 splits give one G") {
  TorusSpec t = make_torus(1, 2);
  const double beta = 0.2, gamma = 0.05, nu = 0.5;
  const double ref = two_point_susy(beta, gamma, nu, t, 0, 1, 0.0, 0.5, 32).value;
  for (double z0 : {-0.2, 0.3}) {
    for (double m2 : {0.1, 1.0}) {
      const double g = two_point_susy(beta, gamma, nu, t, 0, 1, z0, m2, 32).value;
      CHECK(std::abs(g - ref) <= 1e-6);
    }
  }
}

TEST_CASE("two-point symmetry and realness") {
  TorusSpec t = make_torus(1, 2);
  auto gab = two_point_susy(0.25, -0.05, 0.6, t, 0, 1, 0.1, 0.4, 32);
  auto gba = two_point_susy(0.25, -0.05, 0.6, t, 1, 0, 0.1, 0.4, 32);
  CHECK(std::abs(gab.value - gba.value) <= 1e-10);
  CHECK(gab.imag_residue <= 1e-10);
}

TEST_CASE("one-site three-route agreement: susy, direct integral, walk mc") {
  // on the single-site torus the representation reduces to
  // int e^{-nu T - (beta-gamma) T^2} dT
  TorusSpec t = make_torus(1, 1);
  const double beta = 0.2, gamma = 0.05, nu = 0.5;
  auto susy = two_point_susy(beta, gamma, nu, t, 0, 0, 0.0, 0.5, 60);

  GaussRule rule = gauss_legendre(40);
  const double direct = integrate_panels(
      [&](double T) {
        return std::exp(-nu * T - (beta - gamma) * T * T);
      },
      0.0, 40.0, 60, rule);
  CHECK(std::abs(susy.value - direct) <= 1e-8);

  LaplaceConfig cfg;
  cfg.nu = nu;
  cfg.rho = 0.25;
  cfg.samples = 200000;
  cfg.t_max = 60.0;
  cfg.seed = 21;
  TwoPointResult mc = two_point_mc(1, t, beta, gamma, cfg);
  auto est = mc.site_estimate(make_site({0}));
  CHECK(std::abs(susy.value - est.value) <= 3.0 * est.std_error);
}

TEST_CASE("chi-hat identity in the free theory") {
  const double nu = 0.5;
  for (std::int64_t n : {1, 2}) {
    TorusSpec t = make_torus(1, n);
    for (double z0 : {0.0, 0.2}) {
      ChiHatResult ch = chi_hat_susy(0.0, 0.0, nu, t, z0, 0.7, 24);
      CHECK(std::abs((1.0 + z0) * ch.chi_hat - 1.0 / nu) <= 1e-6);
    }
  }
}

TEST_CASE("chi-hat identity with interaction on one site") {
  TorusSpec t = make_torus(1, 1);
  const double beta = 0.2, gamma = 0.0, nu = 0.5, z0 = 0.0;
  for (double m2 : {0.1, 0.5, 1.0}) {
    ChiHatResult ch = chi_hat_susy(beta, gamma, nu, t, z0, m2, 40);
    auto row = two_point_susy_row(beta, gamma, nu, t, 0, z0, m2, 40);
    double chi_n = 0;
    for (const auto& g : row) chi_n += g.value;
    CHECK(std::abs((1.0 + z0) * ch.chi_hat - chi_n) <= 1e-4);
  }
}

TEST_CASE("model forms: tau-delta degree-0 is the lattice quadratic form") {
  TorusSpec t = make_torus(1, 3);
  ModelForms forms(t);
  RngStream rng(11, 4);
  BosonConfig cfg = random_config(3, rng);
  Complex total(0);
  for (int x = 0; x < 3; ++x) total += forms.tau_delta(x, cfg)[0];
  // sum_x tau_{Delta,x} degree-0 equals phi . (-Delta phibar) by symmetry
  Complex expect(0);
  const Eigen::MatrixXd& lap = forms.laplacian();
  for (int x = 0; x < 3; ++x)
    for (int y = 0; y < 3; ++y)
      expect += cfg.phi[x] * (-lap(x, y)) * cfg.phibar[y];
  CHECK(std::abs(total - expect) <= 1e-12);

  // constant phi on the torus: |grad tau|^2 has vanishing degree-0 part
  BosonConfig flat;
  flat.phi.assign(3, Complex(0.7, -0.1));
  flat.phibar.assign(3, std::conj(Complex(0.7, -0.1)));
  for (int x = 0; x < 3; ++x)
    CHECK(std::abs(forms.grad_tau_sq(x, flat)[0]) <= 1e-14);
}
