#pragma once

#include <string>
#include <vector>

namespace longview::scaling {

inline constexpr double kHoursPerYear = 8760.0;       // 24 h/day * 365 d
inline constexpr double kSleepAdjustment = 1.5;       // 16 waking hours/day
inline constexpr double kYearsCap = 1e12;             // reported as ">1T"
inline constexpr double kSearchCapLog10Hours = 50.0;  // CI bisection horizon

struct ScalingPoint {
  double hours = 0.0;     // > 0
  double accuracy = 0.0;  // percent, [0,100]
  std::string run_id;
  std::string condition;  // algorithm x protocol tag
};

// OLS of accuracy on x = log10(hours), every run one point.
struct LinearFit {
  double intercept = 0.0;  // percent at 1 hour
  double slope = 0.0;      // percent per decade of hours
  double resid_se = 0.0;   // s, df = n-2
  double mean_x = 0.0;
  double sxx = 0.0;
  int n = 0;

  double predict(double x) const { return intercept + slope * x; }
};

LinearFit fit_loglinear(const std::vector<ScalingPoint>& points);

// Pointwise CI of the mean response at x:
// yhat +- t(level, n-2) * s * sqrt(1/n + (x - mean_x)^2 / sxx)
std::pair<double, double> confidence_band(const LinearFit& fit, double x, double level = 0.95);

struct Extrapolation {
  double threshold = 0.0;  // percent
  bool no_crossing = false;  // slope <= 0: accuracy never reaches the threshold

  double hours_est = 0.0;
  double hours_lo = 0.0;
  double hours_hi = 0.0;
  bool ci_hi_capped = false;  // lower band never reached the threshold in range

  double years_est = 0.0;
  double years_lo = 0.0;
  double years_hi = 0.0;
  double sleep_adjusted_years = 0.0;

  bool capped = false;  // years_est > 1e12, report ">1T"
};

// Crossing of the fitted line with the threshold, asymmetric CI from the
// band crossings (symmetric in log10 units, asymmetric in linear units).
Extrapolation invert_threshold(const LinearFit& fit, double threshold, double level = 0.95);

struct OodThresholdResult {
  double theta_first = 0.0;
  double theta_second = 0.0;
  double theta_mean = 0.0;
};

// Recovers the (unstated) human-level OOD threshold: evaluates each fitted
// line at the published estimate's log10(hours) and averages the two implied
// thresholds. Throws if the two disagree by more than 1 percentage point.
OodThresholdResult derive_ood_threshold(const std::vector<ScalingPoint>& first_points,
                                        double first_estimate_years,
                                        const std::vector<ScalingPoint>& second_points,
                                        double second_estimate_years);

// Two-sided Student-t quantile, df >= 1: P(|T| <= result) = level.
double student_t_quantile(double level, int df);

// "0.9M", "1.4G", ">1T", "3.9" -- the paper's metric-suffix convention.
std::string format_years(double years, bool capped = false);

}  // namespace longview::scaling
