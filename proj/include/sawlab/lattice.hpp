#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "sawlab/rng.hpp"

namespace sawlab {

inline constexpr int kMaxDim = 8;

// ---------------------------------------------------------------- geometry

struct Site {
  std::array<std::int32_t, kMaxDim> c{};

  std::int32_t operator[](int i) const { return c[i]; }
  std::int32_t& operator[](int i) { return c[i]; }
  bool operator==(const Site&) const = default;
};

inline Site make_site(std::initializer_list<std::int32_t> coords) {
  Site s;
  int i = 0;
  for (auto v : coords) s.c[i++] = v;
  return s;
}

struct SiteHash {
  std::size_t operator()(const Site& s) const {
    std::uint64_t h = 0x2545f4914f6cdd1dULL;
    for (int i = 0; i < kMaxDim; ++i)
      h = RngStream::mix64(h ^ static_cast<std::uint64_t>(
                                   static_cast<std::uint32_t>(s.c[i])));
    return static_cast<std::size_t>(h);
  }
};

struct TorusSpec {
  int d = 1;
  std::int64_t n = 1;
  // Optional factorization n = L^N used by the multi-scale machinery.
  std::optional<std::pair<std::int64_t, int>> ln;

  std::int64_t volume() const {
    std::int64_t v = 1;
    for (int i = 0; i < d; ++i) v *= n;
    return v;
  }
  bool operator==(const TorusSpec& o) const { return d == o.d && n == o.n; }
};

inline TorusSpec make_torus(int d, std::int64_t n) {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("torus: bad dimension");
  if (n < 1) throw std::invalid_argument("torus: side must be >= 1");
  return TorusSpec{d, n, std::nullopt};
}

inline TorusSpec make_torus_scaled(int d, std::int64_t L, int N) {
  if (L < 2 || N < 1) throw std::invalid_argument("torus: need L >= 2, N >= 1");
  std::int64_t n = 1;
  for (int i = 0; i < N; ++i) n *= L;
  TorusSpec t = make_torus(d, n);
  t.ln = {L, N};
  return t;
}

// Euclidean (always nonnegative) reduction keeps sites canonical.
inline std::int32_t mod_euclid(std::int64_t a, std::int64_t n) {
  std::int64_t r = a % n;
  if (r < 0) r += n;
  return static_cast<std::int32_t>(r);
}

inline Site reduce_site(const Site& s, const TorusSpec& spec) {
  Site r;
  for (int i = 0; i < spec.d; ++i) r.c[i] = mod_euclid(s.c[i], spec.n);
  return r;
}

// Direction index dir in [0, 2d): axis dir/2, sign +1 for even, -1 for odd.
inline Site step(const Site& s, int dir, const TorusSpec* spec = nullptr) {
  Site r = s;
  const int axis = dir / 2;
  r.c[axis] += (dir % 2 == 0) ? 1 : -1;
  if (spec) r.c[axis] = mod_euclid(r.c[axis], spec->n);
  return r;
}

inline std::vector<Site> neighbors(const Site& s, int d,
                                   const TorusSpec* spec = nullptr) {
  std::vector<Site> out;
  out.reserve(2 * d);
  for (int dir = 0; dir < 2 * d; ++dir) out.push_back(step(s, dir, spec));
  return out;
}

// Flat index with coordinate 0 fastest.
inline std::int64_t flat_index(const Site& s, const TorusSpec& spec) {
  std::int64_t idx = 0;
  for (int i = spec.d - 1; i >= 0; --i) idx = idx * spec.n + s.c[i];
  return idx;
}

inline Site unflatten(std::int64_t idx, const TorusSpec& spec) {
  Site s;
  for (int i = 0; i < spec.d; ++i) {
    s.c[i] = static_cast<std::int32_t>(idx % spec.n);
    idx /= spec.n;
  }
  return s;
}

// ---------------------------------------------------------------- fields

// Real-valued field: dense over a torus, sparse (finitely supported) on Z^d.
class FieldVector {
 public:
  FieldVector() = default;  // sparse on Z^d
  explicit FieldVector(const TorusSpec& spec)
      : spec_(spec), dense_(static_cast<std::size_t>(spec.volume()), 0.0) {}

  const std::optional<TorusSpec>& torus() const { return spec_; }
  bool dense() const { return spec_.has_value(); }

  double at(const Site& s) const {
    if (spec_) return dense_[flat_index(reduce_site(s, *spec_), *spec_)];
    auto it = sparse_.find(s);
    return it == sparse_.end() ? 0.0 : it->second;
  }

  void add(const Site& s, double v) {
    if (spec_)
      dense_[flat_index(reduce_site(s, *spec_), *spec_)] += v;
    else
      sparse_[s] += v;
  }

  void set(const Site& s, double v) {
    if (spec_)
      dense_[flat_index(reduce_site(s, *spec_), *spec_)] = v;
    else
      sparse_[s] = v;
  }

  template <class Fn>  // fn(site, value) over the support (all sites if dense)
  void for_each(Fn&& fn) const {
    if (spec_) {
      for (std::int64_t i = 0; i < spec_->volume(); ++i)
        fn(unflatten(i, *spec_), dense_[i]);
    } else {
      for (const auto& [s, v] : sparse_) fn(s, v);
    }
  }

  double sum() const {
    double t = 0;
    for_each([&](const Site&, double v) { t += v; });
    return t;
  }

  std::size_t support_size() const {
    if (spec_) return dense_.size();
    return sparse_.size();
  }

  const std::vector<double>& dense_values() const { return dense_; }
  std::vector<double>& dense_values() { return dense_; }

 private:
  std::optional<TorusSpec> spec_;
  std::vector<double> dense_;
  std::unordered_map<Site, double, SiteHash> sparse_;
};

namespace detail {

// Support of f together with its one-ring, as a deduplicated list.
inline std::vector<Site> support_closure(const FieldVector& f, int d) {
  std::vector<Site> sites;
  std::unordered_map<Site, bool, SiteHash> seen;
  f.for_each([&](const Site& s, double) {
    if (!seen.emplace(s, true).second) return;
    sites.push_back(s);
  });
  std::size_t core = sites.size();
  for (std::size_t i = 0; i < core; ++i)
    for (int dir = 0; dir < 2 * d; ++dir) {
      Site nb = step(sites[i], dir);
      if (seen.emplace(nb, true).second) sites.push_back(nb);
    }
  return sites;
}

}  // namespace detail

// ------------------------------------------------------- discrete calculus

enum class LaplacianFormula {
  kStencil,        // sum_{y~x} f_y - 2d f_x
  kForwardSum,     // sum_e grad^e f_x
  kDivGrad,        // -1/2 sum_e grad^{-e} grad^e f_x
};

inline FieldVector laplacian_apply(
    const FieldVector& f, int d,
    LaplacianFormula formula = LaplacianFormula::kStencil) {
  const TorusSpec* spec = f.torus() ? &*f.torus() : nullptr;
  FieldVector out = spec ? FieldVector(*spec) : FieldVector();

  auto grad_e = [&](const Site& x, int dir) {
    return f.at(step(x, dir, spec)) - f.at(x);
  };

  auto apply_at = [&](const Site& x) {
    double v = 0;
    switch (formula) {
      case LaplacianFormula::kStencil:
        for (int dir = 0; dir < 2 * d; ++dir) v += f.at(step(x, dir, spec));
        v -= 2.0 * d * f.at(x);
        break;
      case LaplacianFormula::kForwardSum:
        for (int dir = 0; dir < 2 * d; ++dir) v += grad_e(x, dir);
        break;
      case LaplacianFormula::kDivGrad:
        // grad^{-e} g at x is g(x - e) - g(x) with g = grad^e f.
        for (int dir = 0; dir < 2 * d; ++dir) {
          const int opp = dir ^ 1;
          const Site xm = step(x, opp, spec);
          v += -0.5 * (grad_e(xm, dir) - grad_e(x, dir));
        }
        break;
    }
    if (v != 0.0) out.set(x, v);
  };

  if (spec) {
    for (std::int64_t i = 0; i < spec->volume(); ++i)
      apply_at(unflatten(i, *spec));
  } else {
    for (const Site& x : detail::support_closure(f, d)) apply_at(x);
  }
  return out;
}

// sum_x sum_{e in U} (f_{x+e} - f_x)^2 over all ordered pairs.
inline double gradient_norm_sq(const FieldVector& f, int d) {
  const TorusSpec* spec = f.torus() ? &*f.torus() : nullptr;
  double total = 0;
  auto accumulate_at = [&](const Site& x) {
    const double fx = f.at(x);
    for (int dir = 0; dir < 2 * d; ++dir) {
      const double g = f.at(step(x, dir, spec)) - fx;
      total += g * g;
    }
  };
  if (spec) {
    for (std::int64_t i = 0; i < spec->volume(); ++i)
      accumulate_at(unflatten(i, *spec));
  } else {
    for (const Site& x : detail::support_closure(f, d)) accumulate_at(x);
  }
  return total;
}

inline double field_dot(const FieldVector& a, const FieldVector& b) {
  double t = 0;
  a.for_each([&](const Site& s, double v) { t += v * b.at(s); });
  return t;
}

// ---------------------------------------------------------------- folding

inline Site project_site(const Site& s, const TorusSpec& to) {
  return reduce_site(s, to);
}

// h_x(X^n) = sum_y h_{x+ny}(X): fold a field onto the torus by summing
// translates. Source may be Z^d-sparse or a coarser-divisible torus.
inline FieldVector project_field(const FieldVector& f, const TorusSpec& to) {
  if (f.torus()) {
    const TorusSpec& from = *f.torus();
    if (from.d != to.d || from.n % to.n != 0)
      throw std::invalid_argument("project_field: incompatible sides");
  }
  FieldVector out(to);
  f.for_each([&](const Site& s, double v) {
    if (v != 0.0) out.add(reduce_site(s, to), v);
  });
  return out;
}

}  // namespace sawlab
