#include "pilotwave/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "pilotwave/error.hpp"

namespace pilotwave::stats {

double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  // Small lambda: use the Jacobi-theta dual form, which converges fast there.
  if (lambda < 1.0) {
    const double pi = 3.14159265358979323846;
    const double x = -pi * pi / (8 * lambda * lambda);
    double cdf = 0;
    for (int k = 1; k <= 100; k += 2) {
      const double term = std::exp(x * k * k);
      cdf += term;
      if (term < 1e-17) break;
    }
    cdf *= std::sqrt(2 * pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw Error(ErrorKind::InvalidArgument, "KS test needs samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, (static_cast<double>(i) + 1) / n - f, f - static_cast<double>(i) / n});
  }
  const double sqrt_n = std::sqrt(n);
  return {d, kolmogorov_q((sqrt_n + 0.12 + 0.11 / sqrt_n) * d)};
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double u) {
  return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), u);
}

double chi_square_sf(double statistic, double dof) {
  if (statistic <= 0) return 1.0;
  return boost::math::gamma_q(dof / 2.0, statistic / 2.0);
}

ChiSquareResult independence_2x2(const std::uint64_t table[2][2]) {
  double row[2] = {0, 0}, col[2] = {0, 0}, total = 0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const auto v = static_cast<double>(table[i][j]);
      row[i] += v;
      col[j] += v;
      total += v;
    }
  }
  if (total == 0) throw Error(ErrorKind::InvalidArgument, "empty contingency table");
  double chi2 = 0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double expected = row[i] * col[j] / total;
      if (expected == 0) continue;
      const double diff = static_cast<double>(table[i][j]) - expected;
      chi2 += diff * diff / expected;
    }
  }
  return {chi2, 1.0, chi_square_sf(chi2, 1.0)};
}

ChiSquareResult goodness_of_fit(std::span<const double> observed, std::span<const double> expected,
                                int fitted_parameters) {
  if (observed.size() != expected.size() || observed.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "goodness of fit needs matching bins");
  }
  double chi2 = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (expected[i] <= 0) throw Error(ErrorKind::InvalidArgument, "expected count must be positive");
    const double diff = observed[i] - expected[i];
    chi2 += diff * diff / expected[i];
  }
  const double dof = static_cast<double>(observed.size()) - 1.0 - fitted_parameters;
  return {chi2, dof, chi_square_sf(chi2, dof)};
}

double binomial_radius(double p, std::uint64_t n, double n_sigma) {
  return n_sigma * std::sqrt(p * (1 - p) / static_cast<double>(n));
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace pilotwave::stats
