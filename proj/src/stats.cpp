#include "viap/stats.hpp"

#include <cmath>
#include <limits>

#include "viap/tensor.hpp"

namespace viap {

namespace {

// Continued fraction for I_x(a,b), valid (fast) for x < (a+1)/(a+b+2).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw Error("no_convergence", "incomplete beta continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw Error("bad_argument", "incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw Error("bad_argument", "incomplete beta needs x in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw Error("bad_argument", "degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  return regularized_incomplete_beta(0.5 * df, 0.5, x);
}

std::string to_string(VarianceModel model) { return model == VarianceModel::welch ? "welch" : "pooled"; }

VarianceModel variance_model_from_string(const std::string& name) {
  if (name == "welch") return VarianceModel::welch;
  if (name == "pooled") return VarianceModel::pooled;
  throw Error("bad_config", "unknown variance model '" + name + "'");
}

SampleMoments moments(std::span<const double> values) {
  SampleMoments m;
  if (values.empty()) return m;
  for (double v : values) m.mean += v;
  m.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    for (double v : values) m.variance += (v - m.mean) * (v - m.mean);
    m.variance /= static_cast<double>(values.size() - 1);
  }
  return m;
}

namespace {

void check_samples(std::span<const double> a, std::span<const double> b, const SampleMoments& ma,
                   const SampleMoments& mb) {
  if (a.size() < 2 || b.size() < 2) throw Error("bad_sample", "each t-test sample needs at least two values");
  if (ma.variance == 0.0 && mb.variance == 0.0) {
    throw Error("undefined_statistic", "both samples have zero variance; the t statistic is undefined");
  }
}

}  // namespace

TTestResult welch_ttest(std::span<const double> a, std::span<const double> b) {
  const SampleMoments ma = moments(a), mb = moments(b);
  check_samples(a, b, ma, mb);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double va = ma.variance / na, vb = mb.variance / nb;
  TTestResult r;
  r.model = VarianceModel::welch;
  r.n_a = a.size();
  r.n_b = b.size();
  r.t = (ma.mean - mb.mean) / std::sqrt(va + vb);
  r.df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  r.p = student_t_two_sided_p(r.t, r.df);
  return r;
}

TTestResult pooled_ttest(std::span<const double> a, std::span<const double> b) {
  const SampleMoments ma = moments(a), mb = moments(b);
  check_samples(a, b, ma, mb);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double pooled = ((na - 1.0) * ma.variance + (nb - 1.0) * mb.variance) / (na + nb - 2.0);
  TTestResult r;
  r.model = VarianceModel::pooled;
  r.n_a = a.size();
  r.n_b = b.size();
  r.t = (ma.mean - mb.mean) / std::sqrt(pooled * (1.0 / na + 1.0 / nb));
  r.df = na + nb - 2.0;
  r.p = student_t_two_sided_p(r.t, r.df);
  return r;
}

TTestResult two_sample_ttest(std::span<const double> a, std::span<const double> b, VarianceModel model) {
  return model == VarianceModel::welch ? welch_ttest(a, b) : pooled_ttest(a, b);
}

}  // namespace viap
