#pragma once

// Reference implementations used as test oracles. They follow the textbook
// definitions and share no code with the library.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "stegowav/dsp.hpp"

namespace stegowav::testing {

/// Removes every component the Nyquist-dropped analysis cannot see: the
/// per-frame Nyquist analysis vectors and sample 0 (window weight 0).
/// Built directly from the window definition, not from the transform code.
inline Samples<double> project_to_analysis_support(const Samples<double>& x, const StftConfig& cfg, bool drop_nyquist) {
  const Index L = x.size(), N = cfg.frame_length;
  const Index T = (L - N + cfg.hop - 1) / cfg.hop + 1;
  std::vector<Eigen::VectorXd> cols;
  Eigen::VectorXd e0 = Eigen::VectorXd::Zero(L);
  e0[0] = 1;
  cols.push_back(e0);
  if (drop_nyquist) {
    for (Index m = 0; m < T; ++m) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(L);
      for (Index n = 0; n < N && m * cfg.hop + n < L; ++n) {
        const double h = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * n / N);
        v[m * cfg.hop + n] = h * ((n % 2) ? -1.0 : 1.0);
      }
      cols.push_back(v);
    }
  }
  Eigen::MatrixXd V(L, cols.size());
  for (std::size_t i = 0; i < cols.size(); ++i) V.col(i) = cols[i];
  const Eigen::VectorXd xv = x.matrix();
  const Eigen::VectorXd coef = (V.transpose() * V).ldlt().solve(V.transpose() * xv);
  return (xv - V * coef).array();
}

inline double rel_l2(const Samples<double>& a, const Samples<double>& b) {
  return (a - b).matrix().norm() / b.matrix().norm();
}

// Costs of every monotone alignment path from (0,0) to (n-1,m-1).
inline void enumerate_paths(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y, Index i, Index j, double cost,
                            std::vector<double>& out) {
  cost += (x[i] - y[j]) * (x[i] - y[j]);
  if (i == x.size() - 1 && j == y.size() - 1) {
    out.push_back(cost);
    return;
  }
  if (i + 1 < x.size()) enumerate_paths(x, y, i + 1, j, cost, out);
  if (j + 1 < y.size()) enumerate_paths(x, y, i, j + 1, cost, out);
  if (i + 1 < x.size() && j + 1 < y.size()) enumerate_paths(x, y, i + 1, j + 1, cost, out);
}

inline double brute_force_soft_dtw(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y, double gamma) {
  std::vector<double> costs;
  enumerate_paths(x, y, 0, 0, 0.0, costs);
  const double lo = *std::min_element(costs.begin(), costs.end());
  long double s = 0;
  for (double c : costs) s += std::exp(-static_cast<long double>(c - lo) / gamma);
  return lo - gamma * static_cast<double>(std::log(s));
}

inline double hard_dtw(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y) {
  const Index n = x.size(), m = y.size();
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::ArrayXXd r = Eigen::ArrayXXd::Constant(n + 1, m + 1, inf);
  r(0, 0) = 0;
  for (Index i = 1; i <= n; ++i)
    for (Index j = 1; j <= m; ++j)
      r(i, j) = (x[i - 1] - y[j - 1]) * (x[i - 1] - y[j - 1]) + std::min({r(i - 1, j), r(i, j - 1), r(i - 1, j - 1)});
  return r(n, m);
}

}  // namespace stegowav::testing
