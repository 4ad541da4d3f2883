#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "sawlab/energy.hpp"
#include "sawlab/lattice.hpp"
#include "sawlab/observables.hpp"
#include "sawlab/stats.hpp"
#include "sawlab/walk.hpp"

namespace sawlab {

// sum_x |grad^e f_x|^2 for one signed direction e.
inline double gradient_dir_sq(const FieldVector& f, int d, int dir) {
  const TorusSpec* spec = f.torus() ? &*f.torus() : nullptr;
  double total = 0;
  auto at = [&](const Site& x) {
    const double g = f.at(step(x, dir, spec)) - f.at(x);
    total += g * g;
  };
  if (spec) {
    for (std::int64_t i = 0; i < spec->volume(); ++i) at(unflatten(i, *spec));
  } else {
    for (const Site& x : detail::support_closure(f, d)) at(x);
  }
  return total;
}

// ----------------------------------------------- pathwise scale inequalities

// The monotone quantities are sums f_x(X^n) g_x(X^n) over folded fields of
// nonnegative path functionals, with h_x(X^n) = sum_y h_{x+ny}(X). For the
// local time this is the projected walk's local time; for the gradient terms
// the folded field is the fold of |grad^e ell| on Z^d. Folding the local time
// first and then taking gradients is a different quantity, and its scale
// monotonicity is false (a two-site path already breaks it).
struct ScaleFunctionals {
  double intersection = 0;
  double contact = 0;
  double grad_sq = 0;            // sum over directions of grad_dir
  std::vector<double> grad_dir;  // per signed direction, folded |grad^e ell|
};

inline ScaleFunctionals scale_functionals(const LocalTimeField& ell_zd,
                                          const std::vector<FieldVector>&
                                              absgrad_zd,
                                          int d, const TorusSpec& torus) {
  ScaleFunctionals s;
  LocalTimeField folded = project_field(ell_zd, torus);
  s.intersection = intersection_local_time(folded);
  s.contact = contact_local_time(folded, d);
  for (int dir = 0; dir < 2 * d; ++dir) {
    FieldVector g = project_field(absgrad_zd[dir], torus);
    double total = 0;
    g.for_each([&](const Site&, double v) { total += v * v; });
    s.grad_dir.push_back(total);
    s.grad_sq += total;
  }
  return s;
}

// |grad^e f| on Z^d for each signed direction, as nonnegative sparse fields.
inline std::vector<FieldVector> abs_gradient_fields(const FieldVector& f,
                                                    int d) {
  std::vector<FieldVector> out(2 * d);
  const std::vector<Site> closure = detail::support_closure(f, d);
  for (int dir = 0; dir < 2 * d; ++dir)
    for (const Site& x : closure) {
      const double g = f.at(step(x, dir)) - f.at(x);
      if (g != 0.0) out[dir].set(x, std::abs(g));
    }
  return out;
}

struct FoldCheckReport {
  long samples = 0;
  long violations_intersection = 0;
  long violations_contact = 0;
  long violations_gradient = 0;      // summed over directions (2.14)
  long violations_gradient_dir = 0;  // any single direction (2.13)
  double worst_slack = 0;            // most negative slack observed
  long block_confined = 0;           // paths that never left one block
  double tolerance = 1e-12;
};

// Single-path check of the folding inequalities between consecutive scales
// N_max+1 ... 1 (all functionals folded from the same Z^d skeleton).
inline void fold_check_path(const Path& zd_path, int d, std::int64_t L,
                            int n_max, FoldCheckReport& rep) {
  const LocalTimeField ell = local_times(zd_path);
  const std::vector<FieldVector> absgrad = abs_gradient_fields(ell, d);
  std::vector<ScaleFunctionals> per_scale;
  std::int64_t side = L;
  for (int n = 1; n <= n_max + 1; ++n) {
    per_scale.push_back(
        scale_functionals(ell, absgrad, d, make_torus(d, side)));
    side *= L;
  }
  auto check = [&](double fine, double coarse, long& counter) {
    const double slack = coarse - fine;  // should be >= 0
    if (slack < -rep.tolerance) ++counter;
    if (slack < rep.worst_slack) rep.worst_slack = slack;
  };
  for (int n = 0; n + 1 <= n_max; ++n) {
    const ScaleFunctionals& coarse = per_scale[n];
    const ScaleFunctionals& fine = per_scale[n + 1];
    check(fine.intersection, coarse.intersection, rep.violations_intersection);
    check(fine.contact, coarse.contact, rep.violations_contact);
    check(fine.grad_sq, coarse.grad_sq, rep.violations_gradient);
    for (int dir = 0; dir < 2 * d; ++dir)
      check(fine.grad_dir[dir], coarse.grad_dir[dir],
            rep.violations_gradient_dir);
  }
  ++rep.samples;
}

inline FoldCheckReport folding_inequality_suite(int d, std::int64_t L,
                                                int n_max, double T,
                                                long samples,
                                                std::uint64_t seed,
                                                int threads = 1) {
  struct Acc {
    FoldCheckReport rep;
    void merge(const Acc& o) {
      rep.samples += o.rep.samples;
      rep.violations_intersection += o.rep.violations_intersection;
      rep.violations_contact += o.rep.violations_contact;
      rep.violations_gradient += o.rep.violations_gradient;
      rep.violations_gradient_dir += o.rep.violations_gradient_dir;
      rep.worst_slack = std::min(rep.worst_slack, o.rep.worst_slack);
      rep.block_confined += o.rep.block_confined;
    }
  };
  Acc total = parallel_blocks<Acc>(samples, threads, [&](Acc& acc, long i) {
    RngStream rng(seed, static_cast<std::uint64_t>(i));
    Path p = sample_path(d, std::nullopt, Site{}, T, rng);
    bool confined = true;
    for (const Site& s : p.sites)
      for (int k = 0; k < d; ++k)
        if (s.c[k] < 0 || s.c[k] >= L) confined = false;
    if (confined) ++acc.rep.block_confined;
    fold_check_path(p, d, L, n_max, acc.rep);
  });
  return total.rep;
}

// -------------------------------------------------------- c_{N,T} sequences

struct CNTSequence {
  std::vector<int> scales;              // N values
  std::vector<EstimateWithError> c_nt;  // per N
  EstimateWithError c_infinity;         // Z^d estimate from the same paths
  // e^{-U_{N+1}} - e^{-U_N} per consecutive pair, coupled samples
  std::vector<EstimateWithError> pair_diff;
  long monotonicity_violations = 0;  // exact pathwise failures (gamma <= 0)
  long pathwise_reversals = 0;       // gamma > 0 diagnostic, see notes
  long equality_samples = 0;  // no-wrap samples with U_N == U_inf exactly
};

// One Z^d ensemble projected to every requested scale, so the scale
// differences are coupled sample by sample. For gamma <= 0 the energy is
// monotone across scales path by path (both the intersection and the contact
// terms fold monotonically) and any violation is an error. For gamma in
// (0, beta) no pathwise certificate exists -- wrapping can lower the torus
// gradient energy -- so reversals are only counted as a diagnostic and the
// expectation-level ordering is left to the coupled pair differences.
inline CNTSequence c_nt_sequence(int d, std::int64_t L, int n_min, int n_max,
                                 double T, double beta, double gamma,
                                 long samples, std::uint64_t seed,
                                 int threads = 1) {
  const int nscales = n_max - n_min + 1;
  constexpr int kBatches = 32;
  struct Acc {
    std::vector<WeightedAcc> per_scale;
    std::vector<std::array<double, kBatches>> diff;  // per pair, batched
    std::vector<std::array<long, kBatches>> diff_n;
    WeightedAcc inf;
    long violations = 0;
    long reversals = 0;
    long equalities = 0;
    void init(int ns) {
      per_scale.resize(ns);
      diff.assign(ns > 0 ? ns - 1 : 0, {});
      diff_n.assign(ns > 0 ? ns - 1 : 0, {});
    }
    void merge(const Acc& o) {
      if (per_scale.empty()) init(static_cast<int>(o.per_scale.size()));
      for (std::size_t j = 0; j < o.per_scale.size(); ++j)
        per_scale[j].merge(o.per_scale[j]);
      for (std::size_t j = 0; j < o.diff.size(); ++j)
        for (int b = 0; b < kBatches; ++b) {
          diff[j][b] += o.diff[j][b];
          diff_n[j][b] += o.diff_n[j][b];
        }
      inf.merge(o.inf);
      violations += o.violations;
      reversals += o.reversals;
      equalities += o.equalities;
    }
  };
  Acc total = parallel_blocks<Acc>(samples, threads, [&](Acc& acc, long i) {
    if (acc.per_scale.empty()) acc.init(nscales);
    RngStream rng(seed, static_cast<std::uint64_t>(i));
    Path p = sample_path(d, std::nullopt, Site{}, T, rng);
    LocalTimeField ell = local_times(p);
    const double u_inf = potential_direct(ell, d, beta, gamma);
    acc.inf.add(std::exp(-u_inf));
    const int batch = static_cast<int>(i % kBatches);
    double w_prev = 0;
    double u_prev = 0;
    bool have_prev = false;
    std::int64_t side = 1;
    for (int k = 0; k < n_min; ++k) side *= L;
    for (int n = 0; n < nscales; ++n) {
      LocalTimeField folded = project_field(ell, make_torus(d, side));
      const double u_n = potential_direct(folded, d, beta, gamma);
      const double w_n = std::exp(-u_n);
      acc.per_scale[n].add(w_n);
      if (have_prev) {
        acc.diff[n - 1][batch] += w_n - w_prev;
        ++acc.diff_n[n - 1][batch];
        if (u_n > u_prev + 1e-12) {
          if (gamma <= 0)
            ++acc.violations;
          else
            ++acc.reversals;
        }
      }
      if (gamma <= 0 && u_n < u_inf - 1e-12) ++acc.violations;
      u_prev = u_n;
      w_prev = w_n;
      have_prev = true;
      if (n == nscales - 1 && std::abs(u_n - u_inf) <= 1e-12)
        ++acc.equalities;
      side *= L;
    }
  });

  CNTSequence r;
  for (int n = 0; n < nscales; ++n) {
    r.scales.push_back(n_min + n);
    r.c_nt.push_back(total.per_scale[n].mean_weight());
  }
  for (int n = 0; n + 1 < nscales; ++n) {
    std::vector<double> batch_means;
    for (int b = 0; b < kBatches; ++b)
      if (total.diff_n[n][b] > 0)
        batch_means.push_back(total.diff[n][b] / total.diff_n[n][b]);
    r.pair_diff.push_back(batch_mean(batch_means));
  }
  r.c_infinity = total.inf.mean_weight();
  r.monotonicity_violations = total.violations;
  r.pathwise_reversals = total.reversals;
  r.equality_samples = total.equalities;
  return r;
}

// --------------------------------------------- two-point volume convergence

struct TwoPointConvergence {
  std::vector<int> scales;
  std::vector<EstimateWithError> g_n;  // G_N(a,b) per scale, coupled ensemble
  std::vector<double> tail_bound;      // 2/nu * (2d/(2d+nu))^{m_N}
};

// Laplace integral of the escape probability has the closed form
// int_0^inf e^{-nu T} P(Y_T >= m) dT = (1/nu) (lambda/(lambda+nu))^m.
inline double escape_tail_bound(int d, double nu, std::int64_t m) {
  const double lambda = 2.0 * d;
  if (m <= 0) return 2.0 / nu;
  return 2.0 / nu * std::pow(lambda / (lambda + nu), static_cast<double>(m));
}

inline TwoPointConvergence two_point_convergence(
    int d, std::int64_t L, int n_min, int n_max, const Site& a, const Site& b,
    double beta, double gamma, const LaplaceConfig& cfg) {
  const int nscales = n_max - n_min + 1;
  const double rho = cfg.proposal_rate();
  const double k_norm = (1.0 - std::exp(-rho * cfg.t_max)) / rho;

  struct Acc {
    std::vector<WeightedAcc> g;
    void merge(const Acc& o) {
      if (g.empty()) g.resize(o.g.size());
      for (std::size_t j = 0; j < o.g.size(); ++j) g[j].merge(o.g[j]);
    }
  };
  Acc total =
      parallel_blocks<Acc>(cfg.samples, cfg.threads, [&](Acc& acc, long i) {
        if (acc.g.empty()) acc.g.resize(nscales);
        RngStream rng(cfg.seed, static_cast<std::uint64_t>(i));
        const double t = detail::truncated_exp(rho, cfg.t_max, rng.next_unit());
        Path p = sample_path(d, std::nullopt, a, t, rng);
        LocalTimeField ell = local_times(p);
        std::int64_t side = 1;
        for (int k = 0; k < n_min; ++k) side *= L;
        for (int n = 0; n < nscales; ++n) {
          TorusSpec torus = make_torus(d, side);
          LocalTimeField folded = project_field(ell, torus);
          const double u =
              gamma >= 0 ? potential_gradient_form(folded, d, beta, gamma)
                         : potential_direct(folded, d, beta, gamma);
          const bool hit =
              reduce_site(p.endpoint(), torus) == reduce_site(b, torus);
          const double w =
              hit ? k_norm * std::exp(-u - (cfg.nu - rho) * t) : 0.0;
          acc.g[n].add(w);
          side *= L;
        }
      });

  TwoPointConvergence r;
  std::int64_t side = 1;
  for (int k = 0; k < n_min; ++k) side *= L;
  std::int64_t amax = 0;
  for (int k = 0; k < d; ++k) {
    amax = std::max<std::int64_t>(amax, std::abs(a.c[k]));
    amax = std::max<std::int64_t>(amax, std::abs(b.c[k]));
  }
  for (int n = 0; n < nscales; ++n) {
    r.scales.push_back(n_min + n);
    r.g_n.push_back(total.g[n].mean_weight());
    r.tail_bound.push_back(escape_tail_bound(d, cfg.nu, side / 2 - amax));
    side *= L;
  }
  return r;
}

}  // namespace sawlab
