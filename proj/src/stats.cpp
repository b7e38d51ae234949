#include "qspin/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qspin/error.hpp"

namespace qspin::stats {

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

double standard_error(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  return std::sqrt(variance(xs) / static_cast<double>(xs.size()));
}

double batch_means_se(std::span<const double> xs, std::size_t batches) {
  if (batches < 2) throw InvalidParameter("batch means needs >= 2 batches");
  const std::size_t len = xs.size() / batches;
  if (len == 0) return standard_error(xs);
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) means[b] = mean(xs.subspan(b * len, len));
  return standard_error(means);
}

double integrated_autocorrelation_time(std::span<const double> xs, double c) {
  const std::size_t n = xs.size();
  if (n < 4) return 0.5;
  const double m = mean(xs);
  double c0 = 0.0;
  for (double x : xs) c0 += (x - m) * (x - m);
  c0 /= static_cast<double>(n);
  if (c0 <= 0.0) return 0.5;
  double tau = 0.5;
  for (std::size_t t = 1; t < n / 2; ++t) {
    double ct = 0.0;
    for (std::size_t i = 0; i + t < n; ++i) ct += (xs[i] - m) * (xs[i + t] - m);
    ct /= static_cast<double>(n);
    tau += ct / c0;
    if (static_cast<double>(t) >= c * tau) break;
  }
  return std::max(tau, 0.5);
}

std::vector<double> isotonic_regression(std::span<const double> ys, std::span<const double> weights) {
  if (ys.size() != weights.size()) throw InvalidParameter("isotonic_regression size mismatch");
  struct Block {
    double value, weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    blocks.push_back({ys[i], weights[i], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].value > blocks.back().value) {
      auto b = blocks.back();
      blocks.pop_back();
      auto& a = blocks.back();
      const double w = a.weight + b.weight;
      a.value = w > 0.0 ? (a.value * a.weight + b.value * b.weight) / w : 0.5 * (a.value + b.value);
      a.weight = w;
      a.count += b.count;
    }
  }
  std::vector<double> out;
  out.reserve(ys.size());
  for (const auto& b : blocks) out.insert(out.end(), b.count, b.value);
  return out;
}

double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw InvalidParameter("quantile of empty data");
  std::sort(xs.begin(), xs.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

double LogisticFit::probability(double x) const { return 1.0 / (1.0 + std::exp(-logit(x))); }

LogisticFit fit_logistic(std::span<const double> x, std::span<const double> successes,
                         std::span<const double> trials, double ridge) {
  if (x.size() != successes.size() || x.size() != trials.size()) throw InvalidParameter("logistic size mismatch");
  LogisticFit fit;
  auto objective = [&](double b0, double b1) {
    double ll = -0.5 * ridge * (b0 * b0 + b1 * b1);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double eta = b0 + b1 * x[i];
      // log p = -log1p(e^-eta), log(1-p) = -log1p(e^eta)
      const double log_p = eta > 0 ? -std::log1p(std::exp(-eta)) : eta - std::log1p(std::exp(eta));
      const double log_q = log_p - eta;
      ll += successes[i] * log_p + (trials[i] - successes[i]) * log_q;
    }
    return ll;
  };
  double b0 = 0.0, b1 = 0.0;
  double current = objective(b0, b1);
  for (int iter = 0; iter < 200; ++iter) {
    double g0 = -ridge * b0, g1 = -ridge * b1;
    double h00 = ridge, h01 = 0.0, h11 = ridge;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-(b0 + b1 * x[i])));
      const double r = successes[i] - trials[i] * p;
      const double w = trials[i] * p * (1.0 - p);
      g0 += r;
      g1 += r * x[i];
      h00 += w;
      h01 += w * x[i];
      h11 += w * x[i] * x[i];
    }
    const double det = h00 * h11 - h01 * h01;
    if (!(det > 0.0)) break;
    const double s0 = (h11 * g0 - h01 * g1) / det;
    const double s1 = (h00 * g1 - h01 * g0) / det;
    double step = 1.0;
    double next = objective(b0 + s0, b1 + s1);
    while (next < current && step > 1e-10) {
      step *= 0.5;
      next = objective(b0 + step * s0, b1 + step * s1);
    }
    b0 += step * s0;
    b1 += step * s1;
    const bool done = std::fabs(step * s0) + std::fabs(step * s1) < 1e-12 * (1.0 + std::fabs(b0) + std::fabs(b1));
    current = next;
    if (done) {
      fit.converged = true;
      break;
    }
  }
  fit.intercept = b0;
  fit.slope = b1;
  return fit;
}

}  // namespace qspin::stats
