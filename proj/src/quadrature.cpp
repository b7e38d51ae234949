#include "qspin/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>

#include "qspin/error.hpp"

namespace qspin::quad {

Rule gauss_legendre(std::size_t n) {
  if (n == 0) throw InvalidParameter("Gauss-Legendre rule needs n >= 1");
  Rule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const std::size_t half = (n + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double kd = static_cast<double>(k);
        const double p2 = ((2.0 * kd - 1.0) * x * p1 - (kd - 1.0) * p0) / kd;
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0, p1 = x;
    for (std::size_t k = 2; k <= n; ++k) {
      const double kd = static_cast<double>(k);
      const double p2 = ((2.0 * kd - 1.0) * x * p1 - (kd - 1.0) * p0) / kd;
      p0 = p1;
      p1 = p2;
    }
    dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

namespace {

constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

Segment gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double fc = f(c);
  double kronrod = fc * kWgk[7];
  double gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double fsum = f(c - dx) + f(c + dx);
    kronrod += kWgk[j] * fsum;
    if (j % 2 == 1) gauss += kWg[j / 2] * fsum;
  }
  return {a, b, kronrod * h, std::fabs((kronrod - gauss) * h)};
}

}  // namespace

Result integrate(const std::function<double(double)>& f, double a, double b, double abs_tol, double rel_tol,
                 std::size_t max_intervals) {
  if (a == b) return {};
  std::priority_queue<Segment> heap;
  heap.push(gk15(f, a, b));
  double value = heap.top().value, error = heap.top().error;
  while (error > std::max(abs_tol, rel_tol * std::fabs(value))) {
    if (heap.size() >= max_intervals)
      throw ConvergenceError("adaptive quadrature did not reach tolerance");
    const Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const Segment left = gk15(f, worst.a, mid), right = gk15(f, mid, worst.b);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    // Error bookkeeping drifts by rounding; resum occasionally.
    if (heap.size() % 64 == 0) {
      auto copy = heap;
      value = error = 0.0;
      while (!copy.empty()) {
        value += copy.top().value;
        error += copy.top().error;
        copy.pop();
      }
    }
  }
  // Final exact resum for a deterministic value.
  Result r;
  r.intervals = heap.size();
  r.error = error;
  std::vector<Segment> segs;
  while (!heap.empty()) {
    segs.push_back(heap.top());
    heap.pop();
  }
  std::sort(segs.begin(), segs.end(), [](const Segment& x, const Segment& y) { return x.a < y.a; });
  for (const auto& s : segs) r.value += s.value;
  return r;
}

}  // namespace qspin::quad
