#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "sawlab/lattice.hpp"
#include "sawlab/rng.hpp"

namespace sawlab {

// Continuous-time nearest-neighbour trajectory: jump skeleton kept in full so
// one Z^d sample can be re-projected to every torus scale.
struct Path {
  Site start{};
  double horizon = 0;
  std::vector<double> jump_times;  // strictly increasing, in (0, horizon]
  std::vector<Site> sites;         // visited sites, size jump_times.size() + 1
  std::optional<TorusSpec> torus;

  int jumps() const { return static_cast<int>(jump_times.size()); }
  const Site& endpoint() const { return sites.back(); }
};

using LocalTimeField = FieldVector;

// Rate-2d Poisson jump times, each step uniform over the 2d directions.
// On a torus the path is sampled on Z^d and reduced, which realizes the
// projection identity pathwise.
inline Path sample_path(int d, const std::optional<TorusSpec>& spec,
                        const Site& start, double T, RngStream& rng) {
  if (T < 0) throw std::invalid_argument("sample_path: T must be >= 0");
  Path p;
  p.start = start;
  p.horizon = T;
  p.torus = spec;
  const TorusSpec* sp = spec ? &*spec : nullptr;
  Site x = sp ? reduce_site(start, *sp) : start;
  p.start = x;
  p.sites.push_back(x);
  const double rate = 2.0 * d;
  double t = rng.next_exponential(rate);
  while (t <= T) {
    x = step(x, rng.next_index(2 * d), sp);
    p.jump_times.push_back(t);
    p.sites.push_back(x);
    t += rng.next_exponential(rate);
  }
  return p;
}

// ell^x = Lebesgue time at x; sums to the horizon exactly up to roundoff.
inline LocalTimeField local_times(const Path& p) {
  LocalTimeField ell = p.torus ? LocalTimeField(*p.torus) : LocalTimeField();
  double prev = 0;
  for (int i = 0; i < p.jumps(); ++i) {
    ell.add(p.sites[i], p.jump_times[i] - prev);
    prev = p.jump_times[i];
  }
  ell.add(p.sites.back(), p.horizon - prev);
  return ell;
}

// Same jump times, sites reduced mod n.
inline Path project_path(const Path& p, const TorusSpec& to) {
  if (p.torus) {
    if (p.torus->d != to.d || p.torus->n % to.n != 0)
      throw std::invalid_argument("project_path: incompatible sides");
  }
  Path q = p;
  q.torus = to;
  q.start = reduce_site(p.start, to);
  for (auto& s : q.sites) s = reduce_site(s, to);
  return q;
}

}  // namespace sawlab
