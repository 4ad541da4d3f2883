#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sawlab/energy.hpp"
#include "sawlab/lattice.hpp"
#include "sawlab/rng.hpp"
#include "sawlab/stats.hpp"
#include "sawlab/walk.hpp"

namespace sawlab {

// ----------------------------------------------------------- configuration

struct LaplaceConfig {
  double nu = 1.0;
  double rho = 0.0;  // exponential proposal rate; 0 means the nu/2 default
  long samples = 100000;
  double t_max = 100.0;  // proposal truncation
  std::uint64_t seed = 1;
  int threads = 1;
  double ess_warn_fraction = 0.01;

  double proposal_rate() const { return rho > 0 ? rho : nu / 2.0; }
};

// --------------------------------------------------- incremental energies

// Local-time field with O(2d) incremental updates of I_T and C_T per sojourn.
// Dense storage on tori below a million sites, hashing on Z^d.
class RunningEnergy {
 public:
  RunningEnergy(int d, const TorusSpec* spec) : d_(d), spec_(spec) {
    if (spec_ && spec_->volume() <= (1 << 20))
      dense_.assign(static_cast<std::size_t>(spec_->volume()), 0.0);
    else if (spec_)
      throw std::invalid_argument("RunningEnergy: torus too large");
  }

  void add_sojourn(const Site& x, double dt) {
    if (dt == 0.0) return;
    const Site xr = spec_ ? reduce_site(x, *spec_) : x;
    const double lx = value_at(xr);
    intersection_ += 2.0 * lx * dt + dt * dt;
    double nb_sum = 0;
    for (int dir = 0; dir < 2 * d_; ++dir) {
      const Site y = step(xr, dir, spec_);
      if (y == xr)
        contact_ += 2.0 * lx * dt + dt * dt;  // self-edge on the n=1 torus
      else
        nb_sum += value_at(y);
    }
    contact_ += 2.0 * dt * nb_sum;
    if (spec_)
      dense_[flat_index(xr, *spec_)] = lx + dt;
    else
      sparse_[xr] = lx + dt;
  }

  double intersection() const { return intersection_; }
  double contact() const { return contact_; }

  double potential(double beta, double gamma) const {
    return beta * intersection_ - gamma / (2.0 * d_) * contact_;
  }
  double log_weight(double beta, double gamma) const {
    return -potential(beta, gamma);
  }

 private:
  double value_at(const Site& s) const {
    if (spec_) return dense_[flat_index(s, *spec_)];
    auto it = sparse_.find(s);
    return it == sparse_.end() ? 0.0 : it->second;
  }

  int d_;
  const TorusSpec* spec_;
  std::vector<double> dense_;
  std::unordered_map<Site, double, SiteHash> sparse_;
  double intersection_ = 0;
  double contact_ = 0;
};

namespace detail {

// Walk one sample along an increasing time grid; cb(grid_idx, energy, site)
// fires once per grid point with the energies accumulated up to that time.
template <class Cb>
void run_curve_sample(int d, const TorusSpec* spec, const Site& start,
                      const std::vector<double>& t_grid, RngStream& rng,
                      Cb&& cb) {
  RunningEnergy energy(d, spec);
  Site x = spec ? reduce_site(start, *spec) : start;
  double credited = 0;
  double next_jump = rng.next_exponential(2.0 * d);
  std::size_t g = 0;
  while (g < t_grid.size()) {
    if (next_jump < t_grid[g]) {
      energy.add_sojourn(x, next_jump - credited);
      credited = next_jump;
      x = step(x, rng.next_index(2 * d), spec);
      next_jump += rng.next_exponential(2.0 * d);
    } else {
      energy.add_sojourn(x, t_grid[g] - credited);
      credited = t_grid[g];
      cb(g, energy, x);
      ++g;
    }
  }
}

inline double norm_sq(const Site& x, int d) {
  double s = 0;
  for (int i = 0; i < d; ++i) s += static_cast<double>(x.c[i]) * x.c[i];
  return s;
}

// Inverse CDF of the exponential(rho) truncated to [0, t_max].
inline double truncated_exp(double rho, double t_max, double u) {
  const double z = 1.0 - std::exp(-rho * t_max);
  return -std::log1p(-u * z) / rho;
}

}  // namespace detail

// ----------------------------------------------------------- c_T estimator

// c_T = E_a e^{-U}; start site irrelevant by translation invariance.
inline EstimateWithError c_T_estimator(int d,
                                       const std::optional<TorusSpec>& spec,
                                       double beta, double gamma, double T,
                                       long samples, std::uint64_t seed,
                                       int threads = 1) {
  const TorusSpec* sp = spec ? &*spec : nullptr;
  const std::vector<double> grid{T};
  struct Acc {
    WeightedAcc w;
    void merge(const Acc& o) { w.merge(o.w); }
  };
  Acc total = parallel_blocks<Acc>(samples, threads, [&](Acc& acc, long i) {
    RngStream rng(seed, static_cast<std::uint64_t>(i));
    detail::run_curve_sample(
        d, sp, Site{}, grid, rng,
        [&](std::size_t, const RunningEnergy& e, const Site&) {
          acc.w.add(std::exp(e.log_weight(beta, gamma)));
        });
  });
  return total.w.mean_weight();
}

// ------------------------------------------------------ two-point function

struct TwoPointResult {
  std::optional<TorusSpec> torus;
  // per endpoint: weight sums; every sample lands in exactly one bin
  std::unordered_map<Site, WeightedAcc, SiteHash> bins;
  long samples = 0;
  double ess_fraction = 0;
  bool low_ess_warning = false;

  EstimateWithError site_estimate(const Site& s) const {
    auto it = bins.find(s);
    EstimateWithError e;
    if (it == bins.end()) return e;
    const WeightedAcc& a = it->second;
    e.value = a.sum_w / samples;
    const double second = a.sum_w2 / samples;
    const double var = second - e.value * e.value;
    e.std_error = var > 0 ? std::sqrt(var / samples) : 0.0;
    e.n_effective = a.sum_w2 > 0 ? a.sum_w * a.sum_w / a.sum_w2 : 0.0;
    return e;
  }

  // chi is the site-sum of the per-site estimates, exactly: the value is
  // accumulated term by term in bin order, matching site_estimate().
  EstimateWithError chi() const {
    EstimateWithError e;
    double sw = 0, sw2 = 0;
    for (const auto& [s, a] : bins) {
      e.value += a.sum_w / samples;
      sw += a.sum_w;
      sw2 += a.sum_w2;
    }
    const double mean = sw / samples;
    const double var = sw2 / samples - mean * mean;
    e.std_error = var > 0 ? std::sqrt(var / samples) : 0.0;
    e.n_effective = sw2 > 0 ? sw * sw / sw2 : 0.0;
    return e;
  }
};

// Unbiased estimator of G_nu(0,x) on [0, t_max]: T ~ truncated Exp(rho),
// weight (1 - e^{-rho t_max})/rho * e^{-(nu-rho)T} e^{-U}, binned at X_T.
inline TwoPointResult two_point_mc(int d, const std::optional<TorusSpec>& spec,
                                   double beta, double gamma,
                                   const LaplaceConfig& cfg,
                                   const Site& start = Site{}) {
  const double rho = cfg.proposal_rate();
  if (!(rho > 0)) throw std::invalid_argument("two_point_mc: rho must be > 0");
  const TorusSpec* sp = spec ? &*spec : nullptr;
  const double k_norm = (1.0 - std::exp(-rho * cfg.t_max)) / rho;

  struct Acc {
    std::unordered_map<Site, WeightedAcc, SiteHash> bins;
    void merge(const Acc& o) {
      for (const auto& [s, a] : o.bins) bins[s].merge(a);
    }
  };
  Acc total =
      parallel_blocks<Acc>(cfg.samples, cfg.threads, [&](Acc& acc, long i) {
        RngStream rng(cfg.seed, static_cast<std::uint64_t>(i));
        const double t = detail::truncated_exp(rho, cfg.t_max, rng.next_unit());
        const std::vector<double> grid{t};
        detail::run_curve_sample(
            d, sp, start, grid, rng,
            [&](std::size_t, const RunningEnergy& e, const Site& x) {
              const double lw =
                  e.log_weight(beta, gamma) - (cfg.nu - rho) * t;
              acc.bins[x].add(k_norm * std::exp(lw));
            });
      });

  TwoPointResult r;
  r.torus = spec;
  r.bins = std::move(total.bins);
  r.samples = cfg.samples;
  double sw = 0, sw2 = 0;
  for (const auto& [s, a] : r.bins) {
    sw += a.sum_w;
    sw2 += a.sum_w2;
  }
  r.ess_fraction = sw2 > 0 ? sw * sw / (sw2 * cfg.samples) : 0.0;
  r.low_ess_warning = r.ess_fraction < cfg.ess_warn_fraction;
  return r;
}

// chi = integral of c_T e^{-nu T}: endpoint ignored, same estimator stream.
inline EstimateWithError susceptibility_mc(int d,
                                           const std::optional<TorusSpec>& spec,
                                           double beta, double gamma,
                                           const LaplaceConfig& cfg) {
  return two_point_mc(d, spec, beta, gamma, cfg).chi();
}

// ------------------------------------------------- correlation length xi_p

struct XiPResult {
  EstimateWithError xi;
  double truncation_warning_scale = 0;  // crude bound on the T-cutoff bias
  bool truncated_warning = false;
};

inline XiPResult xi_p_mc(int d, double beta, double gamma, double p,
                         const LaplaceConfig& cfg) {
  if (!(p > 0)) throw std::invalid_argument("xi_p_mc: p must be positive");
  const double rho = cfg.proposal_rate();
  const double k_norm = (1.0 - std::exp(-rho * cfg.t_max)) / rho;
  constexpr int kBatches = 32;

  struct Acc {
    std::array<double, kBatches> w{}, wxp{};
    void merge(const Acc& o) {
      for (int b = 0; b < kBatches; ++b) {
        w[b] += o.w[b];
        wxp[b] += o.wxp[b];
      }
    }
  };
  Acc total =
      parallel_blocks<Acc>(cfg.samples, cfg.threads, [&](Acc& acc, long i) {
        RngStream rng(cfg.seed, static_cast<std::uint64_t>(i));
        const double t = detail::truncated_exp(rho, cfg.t_max, rng.next_unit());
        const std::vector<double> grid{t};
        detail::run_curve_sample(
            d, nullptr, Site{}, grid, rng,
            [&](std::size_t, const RunningEnergy& e, const Site& x) {
              const double w = k_norm * std::exp(e.log_weight(beta, gamma) -
                                                 (cfg.nu - rho) * t);
              const int b = static_cast<int>(i % kBatches);
              acc.w[b] += w;
              acc.wxp[b] += w * std::pow(detail::norm_sq(x, d), p / 2.0);
            });
      });

  double sw = 0, swxp = 0;
  std::vector<double> batch_xi;
  for (int b = 0; b < kBatches; ++b) {
    sw += total.w[b];
    swxp += total.wxp[b];
    if (total.w[b] > 0 && total.wxp[b] > 0)
      batch_xi.push_back(std::pow(total.wxp[b] / total.w[b], 1.0 / p));
  }
  XiPResult r;
  r.xi = batch_mean(batch_xi);
  if (sw > 0) r.xi.value = std::pow(swxp / sw, 1.0 / p);
  // tail bound: c_T <= 1 in the |gamma| <= beta regime and
  // E|X_T|^p <= (2dT + p)^p, so the discarded mass is at most
  // e^{-nu t_max} (2d t_max + p)^p / nu against a chi of order sw/samples.
  const double tail =
      std::exp(-cfg.nu * cfg.t_max) *
      std::pow(2.0 * d * cfg.t_max + p, p) / cfg.nu;
  const double chi_scale = sw / std::max<long>(cfg.samples, 1);
  r.truncation_warning_scale = tail;
  r.truncated_warning = tail > 0.01 * std::max(chi_scale, 1e-300);
  return r;
}

// --------------------------------------------------- mean-square displacement

struct MsdPoint {
  double t;
  EstimateWithError msd;  // <|X_T|^2> under the tilted law
  double log_c_t;         // log of the weight mean, diagnostic only
  double ess = 0;
};

// Weighted mean of |X_T|^2 with weights e^{-U}/c_T per grid T. Log-domain
// accumulation keeps the collapsed phase (gamma > beta) finite.
inline std::vector<MsdPoint> msd_curve(int d, double beta, double gamma,
                                       const std::vector<double>& t_grid,
                                       long samples, std::uint64_t seed,
                                       int threads = 1) {
  constexpr int kBatches = 16;
  struct Acc {
    std::vector<std::array<LogWeightedAcc, kBatches>> per_t;
    void init(std::size_t n) { per_t.resize(n); }
    void merge(const Acc& o) {
      if (per_t.empty()) per_t.resize(o.per_t.size());
      for (std::size_t g = 0; g < o.per_t.size(); ++g)
        for (int b = 0; b < kBatches; ++b) per_t[g][b].merge(o.per_t[g][b]);
    }
  };
  Acc total = parallel_blocks<Acc>(samples, threads, [&](Acc& acc, long i) {
    if (acc.per_t.empty()) acc.init(t_grid.size());
    RngStream rng(seed, static_cast<std::uint64_t>(i));
    const int b = static_cast<int>(i % kBatches);
    detail::run_curve_sample(
        d, nullptr, Site{}, t_grid, rng,
        [&](std::size_t g, const RunningEnergy& e, const Site& x) {
          acc.per_t[g][b].add(e.log_weight(beta, gamma),
                              detail::norm_sq(x, d));
        });
  });

  std::vector<MsdPoint> out;
  for (std::size_t g = 0; g < t_grid.size(); ++g) {
    LogWeightedAcc merged;
    std::vector<double> batch_ratio;
    for (int b = 0; b < kBatches; ++b) {
      if (total.per_t[g][b].sum_w > 0)
        batch_ratio.push_back(total.per_t[g][b].ratio());
      merged.merge(total.per_t[g][b]);
    }
    MsdPoint pt;
    pt.t = t_grid[g];
    pt.msd = batch_mean(batch_ratio);
    pt.msd.value = merged.ratio();
    pt.log_c_t = merged.log_sum_w() - std::log(std::max<long>(samples, 1));
    pt.ess = merged.effective_samples();
    out.push_back(pt);
  }
  return out;
}

struct LogLogFit {
  double slope = 0;
  double intercept = 0;
  double residual_rms = 0;
  int points = 0;
};

inline LogLogFit fit_loglog(const std::vector<MsdPoint>& curve, double t_lo,
                            double t_hi) {
  LogLogFit f;
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : curve)
    if (p.t >= t_lo && p.t <= t_hi && p.msd.value > 0)
      pts.push_back({std::log(p.t), std::log(p.msd.value)});
  f.points = static_cast<int>(pts.size());
  if (pts.size() < 2) return f;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto& [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(pts.size());
  const double denom = n * sxx - sx * sx;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  double rss = 0;
  for (auto& [x, y] : pts) {
    const double r = y - (f.intercept + f.slope * x);
    rss += r * r;
  }
  f.residual_rms = std::sqrt(rss / n);
  return f;
}

// ------------------------------------------------------------ nu_c scanning

struct NuScanPoint {
  double nu;
  double chi = 0;
  double std_error = 0;
  double ess_fraction = 0;
  double tail_fraction = 0;  // weight mass with T in the top fifth of [0,Tmax]
  double curvature = 0;      // second difference of log chi across the grid
  bool stable = false;
};

struct NuScanResult {
  std::vector<NuScanPoint> points;
  double bracket_lo = 0, bracket_hi = 0;
  std::string status;  // "ok", "inconclusive", "open-below"
};

struct ScanConfig {
  double rho = 0.02;
  double t_max = 250.0;
  long samples = 20000;
  std::uint64_t seed = 1;
  int threads = 1;
  double ess_min = 0.005;
  double tail_max = 0.15;
};

// One shared free-walk ensemble, reweighted at every grid nu: the coupling
// and the kernel enter only through the weights, so scan points are coupled
// by common random numbers.
inline NuScanResult nu_c_scan(int d, double beta, double gamma,
                              const std::vector<double>& nu_grid,
                              const ScanConfig& cfg) {
  if (nu_grid.size() < 3)
    throw std::invalid_argument("nu_c_scan: need at least 3 grid points");
  const double rho = cfg.rho;
  const double k_norm = (1.0 - std::exp(-rho * cfg.t_max)) / rho;
  const std::size_t m = nu_grid.size();

  struct Acc {
    std::vector<double> w, w2, wtail;
    long n = 0;
    void init(std::size_t k) {
      w.assign(k, 0.0);
      w2.assign(k, 0.0);
      wtail.assign(k, 0.0);
    }
    void merge(const Acc& o) {
      if (w.empty()) init(o.w.size());
      if (o.w.empty()) return;
      for (std::size_t j = 0; j < w.size(); ++j) {
        w[j] += o.w[j];
        w2[j] += o.w2[j];
        wtail[j] += o.wtail[j];
      }
      n += o.n;
    }
  };
  Acc total =
      parallel_blocks<Acc>(cfg.samples, cfg.threads, [&](Acc& acc, long i) {
        if (acc.w.empty()) acc.init(m);
        RngStream rng(cfg.seed, static_cast<std::uint64_t>(i));
        const double t = detail::truncated_exp(rho, cfg.t_max, rng.next_unit());
        const std::vector<double> grid{t};
        detail::run_curve_sample(
            d, nullptr, Site{}, grid, rng,
            [&](std::size_t, const RunningEnergy& e, const Site&) {
              const double lw0 = e.log_weight(beta, gamma) + rho * t;
              for (std::size_t j = 0; j < m; ++j) {
                const double w = k_norm * std::exp(lw0 - nu_grid[j] * t);
                acc.w[j] += w;
                acc.w2[j] += w * w;
                if (t > 0.8 * cfg.t_max) acc.wtail[j] += w;
              }
            });
        ++acc.n;
      });

  NuScanResult r;
  r.points.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    NuScanPoint& p = r.points[j];
    p.nu = nu_grid[j];
    p.chi = total.w[j] / cfg.samples;
    const double var = total.w2[j] / cfg.samples - p.chi * p.chi;
    p.std_error = var > 0 ? std::sqrt(var / cfg.samples) : 0.0;
    p.ess_fraction = total.w2[j] > 0
                         ? total.w[j] * total.w[j] /
                               (total.w2[j] * cfg.samples)
                         : 0.0;
    p.tail_fraction = total.w[j] > 0 ? total.wtail[j] / total.w[j] : 0.0;
    p.stable = p.ess_fraction >= cfg.ess_min && p.tail_fraction <= cfg.tail_max;
  }
  for (std::size_t j = 1; j + 1 < m; ++j) {
    if (r.points[j - 1].chi > 0 && r.points[j].chi > 0 &&
        r.points[j + 1].chi > 0)
      r.points[j].curvature = std::log(r.points[j - 1].chi) -
                              2.0 * std::log(r.points[j].chi) +
                              std::log(r.points[j + 1].chi);
  }

  // smallest nu such that every grid point from there up is stable
  std::size_t hi = m;
  for (std::size_t j = m; j-- > 0;) {
    if (r.points[j].stable)
      hi = j;
    else
      break;
  }
  if (hi == m) {
    r.status = "inconclusive";
    r.bracket_lo = nu_grid.front();
    r.bracket_hi = nu_grid.back();
    return r;
  }
  r.bracket_hi = nu_grid[hi];
  if (hi == 0) {
    const double step = nu_grid[1] - nu_grid[0];
    r.bracket_lo = nu_grid[0] - step;
    r.status = "open-below";
  } else {
    r.bracket_lo = nu_grid[hi - 1];
    r.status = "ok";
  }
  return r;
}

// ------------------------------------------------------------- phase scan

struct PhaseCell {
  double beta, gamma;
  LogLogFit fit;
};

struct PhaseScanResult {
  std::vector<double> beta_grid, gamma_grid;
  std::vector<PhaseCell> cells;  // row-major over (beta, gamma)
};

// MSD exponents over a (beta, gamma) grid from one shared path ensemble.
inline PhaseScanResult phase_scan(int d, const std::vector<double>& beta_grid,
                                  const std::vector<double>& gamma_grid,
                                  const std::vector<double>& t_grid,
                                  long samples, std::uint64_t seed,
                                  double fit_lo, double fit_hi,
                                  int threads = 1) {
  const std::size_t ncells = beta_grid.size() * gamma_grid.size();
  constexpr int kBatches = 16;
  struct Acc {
    // [cell][grid_t][batch]
    std::vector<std::vector<std::array<LogWeightedAcc, kBatches>>> a;
    void init(std::size_t cells, std::size_t nt) {
      a.assign(cells, std::vector<std::array<LogWeightedAcc, kBatches>>(nt));
    }
    void merge(const Acc& o) {
      if (a.empty() && !o.a.empty()) init(o.a.size(), o.a[0].size());
      for (std::size_t c = 0; c < o.a.size(); ++c)
        for (std::size_t g = 0; g < o.a[c].size(); ++g)
          for (int b = 0; b < kBatches; ++b) a[c][g][b].merge(o.a[c][g][b]);
    }
  };
  Acc total = parallel_blocks<Acc>(samples, threads, [&](Acc& acc, long i) {
    if (acc.a.empty()) acc.init(ncells, t_grid.size());
    RngStream rng(seed, static_cast<std::uint64_t>(i));
    const int b = static_cast<int>(i % kBatches);
    detail::run_curve_sample(
        d, nullptr, Site{}, t_grid, rng,
        [&](std::size_t g, const RunningEnergy& e, const Site& x) {
          const double x2 = detail::norm_sq(x, d);
          std::size_t c = 0;
          for (double beta : beta_grid)
            for (double gamma : gamma_grid) {
              const double lw = -(beta * e.intersection() -
                                  gamma / (2.0 * d) * e.contact());
              acc.a[c][g][b].add(lw, x2);
              ++c;
            }
        });
  });

  PhaseScanResult r;
  r.beta_grid = beta_grid;
  r.gamma_grid = gamma_grid;
  std::size_t c = 0;
  for (double beta : beta_grid)
    for (double gamma : gamma_grid) {
      std::vector<MsdPoint> curve;
      for (std::size_t g = 0; g < t_grid.size(); ++g) {
        LogWeightedAcc merged;
        for (int b = 0; b < kBatches; ++b) merged.merge(total.a[c][g][b]);
        MsdPoint pt;
        pt.t = t_grid[g];
        pt.msd.value = merged.ratio();
        curve.push_back(pt);
      }
      r.cells.push_back({beta, gamma, fit_loglog(curve, fit_lo, fit_hi)});
      ++c;
    }
  return r;
}

}  // namespace sawlab
