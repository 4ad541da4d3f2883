#pragma once

#include <cmath>
#include <stdexcept>

#include "sawlab/lattice.hpp"
#include "sawlab/walk.hpp"

namespace sawlab {

struct CouplingSet {
  double beta = 0;   // self-intersection penalty, > 0 for the model proper
  double gamma = 0;  // contact coupling; |gamma| < beta in the analysis regime
  double nu = 0;     // Laplace-transform mass
};

struct EnergyReport {
  double intersection = 0;  // I_T
  double contact = 0;       // C_T
  double grad_sq = 0;       // |grad ell|^2
  double potential = 0;     // U_{beta,gamma,T}
};

// I_T = sum_x (ell^x)^2
inline double intersection_local_time(const LocalTimeField& ell) {
  double t = 0;
  ell.for_each([&](const Site&, double v) { t += v * v; });
  return t;
}

// C_T = sum_x sum_{e in U} ell^x ell^{x+e}; ordered pairs, so each unordered
// contact counts twice, matching the gamma/2d normalization.
inline double contact_local_time(const LocalTimeField& ell, int d) {
  const TorusSpec* spec = ell.torus() ? &*ell.torus() : nullptr;
  double t = 0;
  ell.for_each([&](const Site& x, double v) {
    if (v == 0.0) return;
    for (int dir = 0; dir < 2 * d; ++dir) t += v * ell.at(step(x, dir, spec));
  });
  return t;
}

// U = beta I_T - (gamma/2d) C_T
inline double potential_direct(const LocalTimeField& ell, int d, double beta,
                               double gamma) {
  return beta * intersection_local_time(ell) -
         gamma / (2.0 * d) * contact_local_time(ell, d);
}

// U = (beta - gamma) I_T + (gamma/4d) |grad ell|^2
inline double potential_gradient_form(const LocalTimeField& ell, int d,
                                      double beta, double gamma) {
  return (beta - gamma) * intersection_local_time(ell) +
         gamma / (4.0 * d) * gradient_norm_sq(ell, d);
}

// -U, i.e. the log of the Boltzmann factor; callers exponentiate as late as
// possible to avoid overflow for strongly attractive samples.
inline double log_boltzmann_weight(const LocalTimeField& ell, int d,
                                   double beta, double gamma) {
  const double u = gamma >= 0 ? potential_gradient_form(ell, d, beta, gamma)
                              : potential_direct(ell, d, beta, gamma);
  return -u;
}

inline double boltzmann_weight(const LocalTimeField& ell, int d, double beta,
                               double gamma) {
  return std::exp(log_boltzmann_weight(ell, d, beta, gamma));
}

inline EnergyReport energy_report(const LocalTimeField& ell, int d, double beta,
                                  double gamma) {
  EnergyReport r;
  r.intersection = intersection_local_time(ell);
  r.contact = contact_local_time(ell, d);
  r.grad_sq = gradient_norm_sq(ell, d);
  r.potential = beta * r.intersection - gamma / (2.0 * d) * r.contact;
  return r;
}

}  // namespace sawlab
