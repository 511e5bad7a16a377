#include "butterfly/stats.hpp"

#include "butterfly/error.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <map>

namespace butterfly::stats {

double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 16) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

Moments moments(std::span<const double> x) {
  require(x.size() >= 2, ErrorCode::InvalidArgument, "need at least two samples");
  Moments out;
  out.count = x.size();
  const double r = static_cast<double>(x.size());
  out.mean = pairwise_sum(x) / r;
  std::vector<double> d2(x.size());
  std::vector<double> d4(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - out.mean;
    d2[i] = d * d;
    d4[i] = d2[i] * d2[i];
  }
  const double s2 = pairwise_sum(d2);
  out.variance = s2 / (r - 1.0);
  out.central4 = pairwise_sum(d4) / r;
  const double v = s2 / r;
  out.variance_se = std::sqrt(std::max(0.0, out.central4 - v * v) / r);
  return out;
}

namespace {

Regression fit(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
  require(x.size() == y.size() && x.size() == w.size(), ErrorCode::InvalidArgument,
          "regression inputs differ in length");
  require(x.size() >= 3, ErrorCode::InvalidArgument, "need at least three points");
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double mx = sx / sw;
  const double my = sy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
  }
  require(sxx > 0.0, ErrorCode::InvalidArgument, "degenerate regressor");
  Regression out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - out.intercept - out.slope * x[i];
    rss += w[i] * e * e;
  }
  const double dof = static_cast<double>(x.size()) - 2.0;
  out.slope_se = std::sqrt(rss / dof / sxx);
  if (out.slope_se == 0.0) {
    out.t = out.slope == 0.0 ? 0.0 : std::copysign(INFINITY, out.slope);
  } else {
    out.t = out.slope / out.slope_se;
  }
  const boost::math::students_t dist(dof);
  if (std::isinf(out.t)) {
    out.p_two_sided = 0.0;
    out.p_greater = out.t > 0 ? 0.0 : 1.0;
  } else {
    out.p_two_sided = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t)));
    out.p_greater = boost::math::cdf(boost::math::complement(dist, out.t));
  }
  return out;
}

}  // namespace

Regression ols(std::span<const double> x, std::span<const double> y) {
  const std::vector<double> w(x.size(), 1.0);
  return fit(x, y, w);
}

Regression wls(std::span<const double> x, std::span<const double> y, std::span<const double> se) {
  std::vector<double> w(se.size());
  for (std::size_t i = 0; i < se.size(); ++i) {
    require(se[i] > 0.0, ErrorCode::InvalidArgument, "non-positive standard error");
    w[i] = 1.0 / (se[i] * se[i]);
  }
  return fit(x, y, w);
}

TrendTest mann_kendall(std::span<const double> y) {
  const std::size_t n = y.size();
  require(n >= 3, ErrorCode::InvalidArgument, "need at least three points");
  TrendTest out;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      out.s += (y[j] > y[i]) - (y[j] < y[i]);
    }
  }
  std::map<double, std::size_t> ties;
  for (double v : y) ++ties[v];
  const double nn = static_cast<double>(n);
  double var = nn * (nn - 1.0) * (2.0 * nn + 5.0);
  for (const auto& [v, t] : ties) {
    const double tt = static_cast<double>(t);
    var -= tt * (tt - 1.0) * (2.0 * tt + 5.0);
  }
  var /= 18.0;
  if (var <= 0.0) return out;
  if (out.s > 0) out.z = (out.s - 1.0) / std::sqrt(var);
  else if (out.s < 0) out.z = (out.s + 1.0) / std::sqrt(var);
  const boost::math::normal_distribution<double> normal;
  out.p_upward = boost::math::cdf(boost::math::complement(normal, out.z));
  return out;
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), ErrorCode::InvalidArgument, "empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  KsResult out;
  out.statistic = d;
  const double ne = na * nb / (na + nb);
  const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  // Kolmogorov distribution tail, Stephens' small-sample correction.
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    p += term;
    if (std::abs(term) < 1e-12) break;
  }
  out.p_value = std::clamp(lambda < 1e-3 ? 1.0 : p, 0.0, 1.0);
  return out;
}

}  // namespace butterfly::stats
