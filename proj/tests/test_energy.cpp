#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "sawlab/energy.hpp"
#include "sawlab/walk.hpp"

using namespace sawlab;

TEST_CASE("intersection local time basics") {
  // stay-put path: I_T = T^2
  Path p;
  p.horizon = 3.0;
  p.sites = {make_site({0})};
  CHECK(intersection_local_time(local_times(p)) == Catch::Approx(9.0));

  FieldVector two;
  two.set(make_site({0}), 2.5);
  two.set(make_site({1}), 1.5);
  CHECK(intersection_local_time(two) == Catch::Approx(8.5));
}

TEST_CASE("cauchy-schwarz floor for I_T") {
  for (int i = 0; i < 200; ++i) {
    RngStream rng(21, i);
    Path p = sample_path(1, std::nullopt, Site{}, 5.0, rng);
    LocalTimeField ell = local_times(p);
    const double it = intersection_local_time(ell);
    CHECK(it >= 25.0 / ell.support_size() - 1e-12);
  }
}

TEST_CASE("contact local time and multiplicities") {
  Path stay;
  stay.horizon = 2.0;
  stay.sites = {make_site({0, 0})};
  CHECK(contact_local_time(local_times(stay), 2) ==
        Catch::Approx(0.0).margin(1e-15));

  FieldVector f;
  f.set(make_site({0}), 3.0);
  f.set(make_site({1}), 4.0);
  CHECK(contact_local_time(f, 1) == Catch::Approx(2.0 * 12.0));

  TorusSpec t2 = make_torus(1, 2);
  FieldVector g(t2);
  g.set(make_site({0}), 3.0);
  g.set(make_site({1}), 4.0);
  CHECK(contact_local_time(g, 1) == Catch::Approx(4.0 * 12.0));
}

TEST_CASE("contact bound C_T <= 2d I_T") {
  for (int i = 0; i < 500; ++i) {
    RngStream rng(77, i);
    Path p = sample_path(2, std::nullopt, Site{}, 4.0, rng);
    LocalTimeField ell = local_times(p);
    CHECK(contact_local_time(ell, 2) <=
          4.0 * intersection_local_time(ell) + 1e-12);
  }
}

TEST_CASE("potential examples") {
  Path stay;
  stay.horizon = 2.0;
  stay.sites = {make_site({0})};
  LocalTimeField ell = local_times(stay);
  CHECK(potential_direct(ell, 1, 1.0, 0.0) == Catch::Approx(4.0));

  // gamma = beta: U = (beta/4d) |grad ell|^2; constant field on a torus
  TorusSpec t = make_torus(1, 4);
  FieldVector c(t);
  for (int i = 0; i < 4; ++i) c.set(make_site({i}), 1.25);
  CHECK(potential_gradient_form(c, 1, 0.4, 0.4) ==
        Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("direct and gradient forms agree on random paths") {
  for (int d : {1, 2, 4}) {
    for (int i = 0; i < 300; ++i) {
      RngStream rng(1000 + d, i);
      Path p = sample_path(d, std::nullopt, Site{}, 3.0, rng);
      LocalTimeField ell = local_times(p);
      for (double gamma : {-0.35, 0.0, 0.2}) {
        const double u1 = potential_direct(ell, d, 0.7, gamma);
        const double u2 = potential_gradient_form(ell, d, 0.7, gamma);
        CHECK(std::abs(u1 - u2) <= 1e-10 * (1.0 + std::abs(u1)));
      }
    }
  }
}

TEST_CASE("energy comparison inequalities from the coupling sandwich") {
  // 0 <= gamma < beta: U_{beta-gamma,0} <= U_{beta,gamma} <= U_{beta,0};
  // reversed for gamma < 0.
  const double beta = 0.8;
  for (int i = 0; i < 2000; ++i) {
    RngStream rng(5050, i);
    Path p = sample_path(1, std::nullopt, Site{}, 6.0, rng);
    LocalTimeField ell = local_times(p);
    {
      const double gamma = 0.5;
      const double mid = potential_gradient_form(ell, 1, beta, gamma);
      const double lo = potential_direct(ell, 1, beta - gamma, 0.0);
      const double hi = potential_direct(ell, 1, beta, 0.0);
      CHECK(lo <= mid + 1e-12);
      CHECK(mid <= hi + 1e-12);
    }
    {
      const double gamma = -0.5;
      const double mid = potential_direct(ell, 1, beta, gamma);
      const double lo = potential_direct(ell, 1, beta, 0.0);
      const double hi = potential_direct(ell, 1, beta - gamma, 0.0);
      CHECK(lo <= mid + 1e-12);
      CHECK(mid <= hi + 1e-12);
    }
  }
}

TEST_CASE("boltzmann weight monotonicities") {
  RngStream rng(11, 0);
  Path p = sample_path(2, std::nullopt, Site{}, 5.0, rng);
  LocalTimeField ell = local_times(p);

  CHECK(boltzmann_weight(ell, 2, 0.0, 0.0) == Catch::Approx(1.0));

  double prev = 2.0;
  for (double beta : {0.1, 0.3, 0.9, 2.0}) {
    const double w = boltzmann_weight(ell, 2, beta, 0.0);
    CHECK(w < prev);
    prev = w;
  }
  prev = 0.0;
  for (double gamma : {-0.4, -0.1, 0.0, 0.2, 0.4}) {
    const double w = boltzmann_weight(ell, 2, 0.5, gamma);
    CHECK(w >= prev);
    prev = w;
  }
}

TEST_CASE("positive potential whenever gamma < beta and path nontrivial") {
  for (int i = 0; i < 300; ++i) {
    RngStream rng(31, i);
    Path p = sample_path(1, std::nullopt, Site{}, 2.0, rng);
    LocalTimeField ell = local_times(p);
    CHECK(potential_direct(ell, 1, 0.6, 0.59) > 0.0);
    CHECK(potential_direct(ell, 1, 0.6, -0.3) > 0.0);
  }
}
