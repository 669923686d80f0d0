#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <thread>
#include <vector>

namespace elgm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_sum_exp(const VectorXd& v) {
  double m = kNegInf;
  for (int i = 0; i < v.size(); ++i) m = std::max(m, v[i]);
  if (!std::isfinite(m)) return m;  // all -inf (or a +inf/NaN poisoned input)
  double s = 0.0;
  for (int i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

// log(1 + e^x) without overflow
inline double log1p_exp(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

// Kahan-compensated accumulator. Large-n log-likelihood sums feed finite
// differences of the outer objective, where plain summation noise would
// swamp gradients long before the tolerance.
class CompensatedSum {
 public:
  void add(double term) {
    double t = sum_ + term;
    if (std::fabs(sum_) >= std::fabs(term)) {
      comp_ += (sum_ - t) + term;
    } else {
      comp_ += (term - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double expit(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double std_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Runs fn(i) for i in [0, n). Work is split into fixed-size chunks whose
// boundaries do not depend on the thread count, so any per-index output is
// identical for every value of `threads`.
inline void parallel_for(int64_t n, int threads,
                         const std::function<void(int64_t)>& fn) {
  if (n <= 0) return;
  threads = std::max(1, threads);
  if (threads == 1 || n == 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int64_t> next{0};
  auto worker = [&]() {
    for (;;) {
      int64_t i = next.fetch_add(1);
      if (i >= n) break;
      fn(i);
    }
  };
  int use = static_cast<int>(std::min<int64_t>(threads, n));
  pool.reserve(use);
  for (int t = 0; t < use; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace elgm
