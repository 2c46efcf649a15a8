#pragma once

#include <span>
#include <string>

namespace viap {

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

/// Two-sided p-value of Student's t with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);

enum class VarianceModel { welch, pooled };

std::string to_string(VarianceModel model);
VarianceModel variance_model_from_string(const std::string& name);

struct TTestResult {
  std::string label;
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  VarianceModel model = VarianceModel::welch;
};

/// Unequal-variance two-sample t-test with Welch-Satterthwaite degrees of
/// freedom. Needs n >= 2 per sample and nonzero variance in at least one.
TTestResult welch_ttest(std::span<const double> a, std::span<const double> b);

/// Equal-variance (pooled) variant, df = n_a + n_b - 2.
TTestResult pooled_ttest(std::span<const double> a, std::span<const double> b);

TTestResult two_sample_ttest(std::span<const double> a, std::span<const double> b, VarianceModel model);

struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased (n - 1)
};

SampleMoments moments(std::span<const double> values);

}  // namespace viap
