#include "stegowav/losses.hpp"

#include <cmath>
#include <limits>

namespace stegowav {

std::string to_string(WaveLoss w) { return w == WaveLoss::l1 ? "l1" : "soft_dtw"; }

std::string to_string(ContainerKind c) {
  switch (c) {
    case ContainerKind::magnitude: return "magnitude";
    case ContainerKind::phase: return "phase";
    case ContainerKind::dual: return "dual";
  }
  return "?";
}

WaveLoss parse_wave_loss(const std::string& s) {
  if (s == "l1") return WaveLoss::l1;
  if (s == "soft_dtw" || s == "dtw") return WaveLoss::soft_dtw;
  throw ConfigError("unknown waveform loss '" + s + "' (expected l1 or soft_dtw)");
}

ContainerKind parse_container(const std::string& s) {
  if (s == "magnitude") return ContainerKind::magnitude;
  if (s == "phase") return ContainerKind::phase;
  if (s == "dual") return ContainerKind::dual;
  throw ConfigError("unknown container '" + s + "' (expected magnitude, phase or dual)");
}

void LossConfig::validate() const {
  if (!(beta >= 0 && beta <= 1)) throw ConfigError("beta must lie in [0, 1], got " + std::to_string(beta));
  if (!(lambda >= 0)) throw ConfigError("lambda must be non-negative, got " + std::to_string(lambda));
  if (!(theta >= 0 && theta <= 1)) throw ConfigError("theta must lie in [0, 1], got " + std::to_string(theta));
  if (!(gamma > 0)) throw ConfigError("gamma must be positive, got " + std::to_string(gamma));
}

Var l1(Var a, Var b) {
  detail::require_same_shape("l1", a, b);
  return scale(abs_sum(sub(a, b)), 1.0 / static_cast<double>(a.size()));
}

Var l2(Var a, Var b) {
  detail::require_same_shape("l2", a, b);
  return square_root(scale(sq_sum(sub(a, b)), 1.0 / static_cast<double>(a.size())));
}

// ---------------------------------------------------------------------------
// Soft-DTW

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double softmin3(double a, double b, double c, double gamma) {
  const double m = std::min({a, b, c});
  if (m == kInf) return kInf;
  const double s = std::exp(-(a - m) / gamma) + std::exp(-(b - m) / gamma) + std::exp(-(c - m) / gamma);
  return m - gamma * std::log(s);
}

}  // namespace

SoftDtwResult soft_dtw_full(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y, double gamma, bool gradients) {
  if (x.size() == 0 || y.size() == 0) throw UsageError("soft_dtw of an empty sequence");
  if (!(gamma > 0)) throw ConfigError("soft_dtw gamma must be positive");
  const Index n = x.size(), m = y.size();
  Eigen::ArrayXXd D(n + 2, m + 2);
  D.setZero();
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) D(i + 1, j + 1) = (x[i] - y[j]) * (x[i] - y[j]);

  Eigen::ArrayXXd R = Eigen::ArrayXXd::Constant(n + 2, m + 2, kInf);
  R(0, 0) = 0;
  for (Index i = 1; i <= n; ++i)
    for (Index j = 1; j <= m; ++j) R(i, j) = D(i, j) + softmin3(R(i - 1, j - 1), R(i - 1, j), R(i, j - 1), gamma);

  SoftDtwResult out;
  out.value = R(n, m);
  if (!gradients) return out;

  // Expected alignment matrix, swept backwards.
  for (Index i = 1; i <= n + 1; ++i) R(i, m + 1) = -kInf;
  for (Index j = 1; j <= m + 1; ++j) R(n + 1, j) = -kInf;
  R(n + 1, m + 1) = R(n, m);
  Eigen::ArrayXXd E = Eigen::ArrayXXd::Zero(n + 2, m + 2);
  E(n + 1, m + 1) = 1;
  for (Index j = m; j >= 1; --j) {
    for (Index i = n; i >= 1; --i) {
      const double a = std::exp((R(i + 1, j) - R(i, j) - D(i + 1, j)) / gamma);
      const double b = std::exp((R(i, j + 1) - R(i, j) - D(i, j + 1)) / gamma);
      const double c = std::exp((R(i + 1, j + 1) - R(i, j) - D(i + 1, j + 1)) / gamma);
      E(i, j) = E(i + 1, j) * a + E(i, j + 1) * b + E(i + 1, j + 1) * c;
    }
  }
  out.grad_x = Eigen::ArrayXd::Zero(n);
  out.grad_y = Eigen::ArrayXd::Zero(m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      const double g = 2 * E(i + 1, j + 1) * (x[i] - y[j]);
      out.grad_x[i] += g;
      out.grad_y[j] -= g;
    }
  }
  return out;
}

SoftDtwResult soft_dtw(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y, double gamma, bool gradients) {
  if (x.size() <= kSoftDtwChunkThreshold && y.size() <= kSoftDtwChunkThreshold) {
    return soft_dtw_full(x, y, gamma, gradients);
  }
  if (x.size() != y.size()) {
    throw UsageError("chunked soft_dtw needs equal lengths, got " + std::to_string(x.size()) + " and " +
                     std::to_string(y.size()));
  }
  SoftDtwResult out;
  out.grad_x = Eigen::ArrayXd::Zero(x.size());
  out.grad_y = Eigen::ArrayXd::Zero(y.size());
  for (Index begin = 0; begin < x.size(); begin += kSoftDtwChunk) {
    const Index len = std::min(kSoftDtwChunk, x.size() - begin);
    const SoftDtwResult r = soft_dtw_full(x.segment(begin, len), y.segment(begin, len), gamma, gradients);
    out.value += r.value;
    if (gradients) {
      out.grad_x.segment(begin, len) = r.grad_x;
      out.grad_y.segment(begin, len) = r.grad_y;
    }
  }
  return out;
}

Var soft_dtw_op(Var x, Var y, double gamma) {
  if (x.value().rank() != 1 || y.value().rank() != 1) {
    throw ConfigError("soft_dtw expects 1-D operands, got " + shape_string(x.shape()) + " and " +
                      shape_string(y.shape()));
  }
  const bool need = x.tape->requires_grad(x) || y.tape->requires_grad(y);
  SoftDtwResult r = soft_dtw(x.value().data(), y.value().data(), gamma, need);
  return x.tape->record(Tensor::scalar(r.value), {x, y},
                        [x, y, gx = std::move(r.grad_x), gy = std::move(r.grad_y)](auto& t, const auto& g) {
                          t.accumulate(x, gx * g[0]);
                          t.accumulate(y, gy * g[0]);
                        });
}

// ---------------------------------------------------------------------------
// Composite objectives

LossTerms composite_loss(const LossConfig& cfg, const LossInputs& in) {
  cfg.validate();
  Tape& tape = *in.s.tape;
  const Var zero = tape.constant(Tensor::scalar(0.0));
  LossTerms t;
  t.image = l1(in.s, in.s_prime);
  t.wave = cfg.wave == WaveLoss::l1 ? l1(in.w, in.w_prime) : soft_dtw_op(in.w, in.w_prime, cfg.gamma);
  t.mag = l2(in.m, in.m_prime);
  const bool dual = cfg.container == ContainerKind::dual;
  if (dual) {
    if (in.p.tape == nullptr || in.p_prime.tape == nullptr) throw UsageError("dual container loss needs phase planes");
    t.phase = l2(in.p, in.p_prime);
  } else {
    t.phase = zero;
  }
  auto weight = [&](double c) { return tape.constant(Tensor::scalar(c)); };
  std::vector<Var> terms{t.image, t.wave, t.mag};
  std::vector<Var> weights{weight(cfg.beta), weight(cfg.lambda),
                           weight((1 - cfg.beta) * (dual ? 1 - cfg.theta : 1.0))};
  if (dual) {
    terms.push_back(t.phase);
    weights.push_back(weight((1 - cfg.beta) * cfg.theta));
  }
  t.total = weighted_sum(terms, weights);
  return t;
}

}  // namespace stegowav
