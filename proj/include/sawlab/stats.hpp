#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <thread>
#include <vector>

namespace sawlab {

struct EstimateWithError {
  double value = 0;
  double std_error = 0;
  double n_effective = 0;
};

// Plain weighted accumulator (weights assumed to fit in double).
struct WeightedAcc {
  double sum_w = 0, sum_w2 = 0, sum_wx = 0;
  long n = 0;

  void add(double w, double x = 1.0) {
    sum_w += w;
    sum_w2 += w * w;
    sum_wx += w * x;
    ++n;
  }
  void merge(const WeightedAcc& o) {
    sum_w += o.sum_w;
    sum_w2 += o.sum_w2;
    sum_wx += o.sum_wx;
    n += o.n;
  }
  // Mean of w over all n samples (x ignored), with standard error.
  EstimateWithError mean_weight() const {
    EstimateWithError e;
    if (n == 0) return e;
    e.value = sum_w / n;
    const double var = sum_w2 / n - e.value * e.value;
    e.std_error = var > 0 ? std::sqrt(var / n) : 0.0;
    e.n_effective = sum_w2 > 0 ? sum_w * sum_w / sum_w2 : 0.0;
    return e;
  }
};

// Log-domain weighted accumulator: tolerates weights like e^{2500} that
// appear in the collapsed phase. Sums are kept relative to the running max
// log-weight.
struct LogWeightedAcc {
  double max_lw = -std::numeric_limits<double>::infinity();
  double sum_w = 0, sum_w2 = 0, sum_wx = 0;
  long n = 0;

  void add(double lw, double x) {
    ++n;
    if (lw == -std::numeric_limits<double>::infinity()) return;
    if (lw > max_lw) {
      const double scale =
          max_lw == -std::numeric_limits<double>::infinity()
              ? 0.0
              : std::exp(max_lw - lw);
      sum_w *= scale;
      sum_w2 *= scale * scale;
      sum_wx *= scale;
      max_lw = lw;
    }
    const double w = std::exp(lw - max_lw);
    sum_w += w;
    sum_w2 += w * w;
    sum_wx += w * x;
  }
  void merge(const LogWeightedAcc& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    n += o.n;
    if (o.max_lw == -std::numeric_limits<double>::infinity()) return;
    if (o.max_lw > max_lw) {
      const double scale = max_lw == -std::numeric_limits<double>::infinity()
                               ? 0.0
                               : std::exp(max_lw - o.max_lw);
      sum_w = sum_w * scale + o.sum_w;
      sum_w2 = sum_w2 * scale * scale + o.sum_w2;
      sum_wx = sum_wx * scale + o.sum_wx;
      max_lw = o.max_lw;
    } else {
      const double scale = std::exp(o.max_lw - max_lw);
      sum_w += o.sum_w * scale;
      sum_w2 += o.sum_w2 * scale * scale;
      sum_wx += o.sum_wx * scale;
    }
  }
  // weighted mean of x
  double ratio() const { return sum_w > 0 ? sum_wx / sum_w : 0.0; }
  // log of the weight sum
  double log_sum_w() const {
    return sum_w > 0 ? max_lw + std::log(sum_w)
                     : -std::numeric_limits<double>::infinity();
  }
  // scale-invariant effective sample count
  double effective_samples() const {
    return sum_w2 > 0 ? sum_w * sum_w / sum_w2 : 0.0;
  }
};

// Deterministic block-parallel reduction: samples are split into fixed-size
// blocks, workers claim blocks dynamically, per-block accumulators are merged
// in block order. The result is independent of the thread count.
//
// Acc must be default-constructible with member merge(const Acc&).
// body(acc, sample_index) accumulates one sample.
template <class Acc, class Body>
Acc parallel_blocks(long samples, int threads, Body&& body,
                    long block_size = 8192) {
  const long nblocks = (samples + block_size - 1) / block_size;
  std::vector<Acc> partial(static_cast<std::size_t>(nblocks));
  std::atomic<long> next{0};
  auto worker = [&]() {
    for (;;) {
      const long b = next.fetch_add(1);
      if (b >= nblocks) break;
      Acc acc;
      const long lo = b * block_size;
      const long hi = std::min(samples, lo + block_size);
      for (long i = lo; i < hi; ++i) body(acc, i);
      partial[static_cast<std::size_t>(b)] = std::move(acc);
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  Acc total;
  for (auto& p : partial) total.merge(p);
  return total;
}

// Batch means over a fixed number of batches keyed by sample index; used for
// ratio estimators where per-sample variance propagation is awkward.
inline EstimateWithError batch_mean(const std::vector<double>& batch_values) {
  EstimateWithError e;
  const std::size_t k = batch_values.size();
  if (k == 0) return e;
  double m = 0;
  for (double v : batch_values) m += v;
  m /= static_cast<double>(k);
  double var = 0;
  for (double v : batch_values) var += (v - m) * (v - m);
  var /= k > 1 ? static_cast<double>(k - 1) : 1.0;
  e.value = m;
  e.std_error = std::sqrt(var / static_cast<double>(k));
  e.n_effective = static_cast<double>(k);
  return e;
}

}  // namespace sawlab
