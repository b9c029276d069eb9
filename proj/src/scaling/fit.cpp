#include "longview/scaling/fit.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace longview::scaling {

namespace {

// Regularized incomplete beta via Lentz's continued fraction.
double betacf(double a, double b, double x) {
  const int max_iter = 300;
  const double eps = 3e-14, fpmin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

double ibeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  double front = std::exp(a * std::log(x) + b * std::log(1.0 - x) - ln_beta);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

// P(T <= t) for Student-t with df degrees of freedom.
double t_cdf(double t, int df) {
  double x = static_cast<double>(df) / (df + t * t);
  double p = 0.5 * ibeta(df / 2.0, 0.5, x);
  return t > 0 ? 1.0 - p : p;
}

}  // namespace

double student_t_quantile(double level, int df) {
  if (df < 1) throw std::invalid_argument("student_t_quantile: df must be >= 1");
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("student_t_quantile: level must be in (0,1)");
  double target = 0.5 + level / 2.0;  // two-sided
  double lo = 0.0, hi = 1.0;
  while (t_cdf(hi, df) < target) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (t_cdf(mid, df) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

LinearFit fit_loglinear(const std::vector<ScalingPoint>& points) {
  const int n = static_cast<int>(points.size());
  if (n < 3)
    throw std::invalid_argument("fit_loglinear: need at least 3 points, got " + std::to_string(n));
  std::vector<double> x(points.size()), y(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].hours > 0))
      throw std::invalid_argument("fit_loglinear: hours must be > 0 (point " + std::to_string(i) + ")");
    if (points[i].accuracy < 0.0 || points[i].accuracy > 100.0)
      throw std::invalid_argument("fit_loglinear: accuracy out of [0,100] (point " + std::to_string(i) + ")");
    x[i] = std::log10(points[i].hours);
    y[i] = points[i].accuracy;
  }
  double xb = 0, yb = 0;
  for (int i = 0; i < n; ++i) {
    xb += x[static_cast<size_t>(i)];
    yb += y[static_cast<size_t>(i)];
  }
  xb /= n;
  yb /= n;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    double dx = x[static_cast<size_t>(i)] - xb;
    sxx += dx * dx;
    sxy += dx * (y[static_cast<size_t>(i)] - yb);
  }
  if (!(sxx > 0))
    throw std::invalid_argument("fit_loglinear: all hours identical, slope undefined (Sxx = 0)");

  LinearFit fit;
  fit.n = n;
  fit.mean_x = xb;
  fit.sxx = sxx;
  fit.slope = sxy / sxx;
  fit.intercept = yb - fit.slope * xb;
  double rss = 0;
  for (int i = 0; i < n; ++i) {
    double r = y[static_cast<size_t>(i)] - fit.predict(x[static_cast<size_t>(i)]);
    rss += r * r;
  }
  fit.resid_se = std::sqrt(rss / std::max(1, n - 2));
  return fit;
}

std::pair<double, double> confidence_band(const LinearFit& fit, double x, double level) {
  if (fit.n <= 2)
    throw std::invalid_argument("confidence_band: need n > 2 for a residual degree of freedom");
  double t = student_t_quantile(level, fit.n - 2);
  double half = t * fit.resid_se *
                std::sqrt(1.0 / fit.n + (x - fit.mean_x) * (x - fit.mean_x) / fit.sxx);
  double yhat = fit.predict(x);
  return {yhat - half, yhat + half};
}

namespace {

// First crossing of the chosen band edge with the threshold at x >= mean_x.
// Both edges are increasing there (slope > 0), so bisection is exact.
// Returns the cap when the edge never reaches the threshold.
double band_crossing(const LinearFit& fit, double threshold, double level, bool upper, bool* capped) {
  auto edge = [&](double x) {
    auto [lo, hi] = confidence_band(fit, x, level);
    return upper ? hi : lo;
  };
  double lo = fit.mean_x, hi = kSearchCapLog10Hours;
  if (edge(lo) >= threshold) return lo;
  if (edge(hi) < threshold) {
    if (capped) *capped = true;
    return hi;
  }
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (edge(mid) < threshold)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

Extrapolation invert_threshold(const LinearFit& fit, double threshold, double level) {
  Extrapolation ex;
  ex.threshold = threshold;
  if (!(fit.slope > 0)) {
    ex.no_crossing = true;
    return ex;
  }
  double x_est = (threshold - fit.intercept) / fit.slope;
  double x_lo = band_crossing(fit, threshold, level, /*upper=*/true, nullptr);
  bool hi_capped = false;
  double x_hi = band_crossing(fit, threshold, level, /*upper=*/false, &hi_capped);
  ex.ci_hi_capped = hi_capped;

  ex.hours_est = std::pow(10.0, x_est);
  ex.hours_lo = std::pow(10.0, x_lo);
  ex.hours_hi = std::pow(10.0, x_hi);
  ex.years_est = ex.hours_est / kHoursPerYear;
  ex.years_lo = ex.hours_lo / kHoursPerYear;
  ex.years_hi = ex.hours_hi / kHoursPerYear;
  ex.sleep_adjusted_years = kSleepAdjustment * ex.years_est;
  ex.capped = ex.years_est > kYearsCap;
  return ex;
}

OodThresholdResult derive_ood_threshold(const std::vector<ScalingPoint>& first_points,
                                        double first_estimate_years,
                                        const std::vector<ScalingPoint>& second_points,
                                        double second_estimate_years) {
  auto implied = [](const std::vector<ScalingPoint>& points, double years) {
    LinearFit fit = fit_loglinear(points);
    double x = std::log10(years * kHoursPerYear);
    return fit.predict(x);
  };
  OodThresholdResult res;
  res.theta_first = implied(first_points, first_estimate_years);
  res.theta_second = implied(second_points, second_estimate_years);
  if (std::abs(res.theta_first - res.theta_second) > 1.0)
    throw std::runtime_error("derive_ood_threshold: implied thresholds disagree by more than 1 "
                             "percentage point (" +
                             std::to_string(res.theta_first) + " vs " +
                             std::to_string(res.theta_second) + "); check the input rows");
  res.theta_mean = 0.5 * (res.theta_first + res.theta_second);
  return res;
}

std::string format_years(double years, bool capped) {
  char buf[64];
  if (capped || years > kYearsCap) return ">1T";
  struct Suffix {
    const char* name;
    double scale;
  };
  static const Suffix suffixes[] = {{"T", 1e12}, {"G", 1e9}, {"M", 1e6}, {"k", 1e3}};
  for (const auto& s : suffixes)
    if (years >= s.scale) {
      std::snprintf(buf, sizeof(buf), "%.1f%s", years / s.scale, s.name);
      return buf;
    }
  std::snprintf(buf, sizeof(buf), "%.1f", years);
  return buf;
}

}  // namespace longview::scaling
