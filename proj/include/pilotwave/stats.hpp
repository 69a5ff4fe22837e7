#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace pilotwave::stats {

struct KsResult {
  double statistic = 0;
  double p_value = 0;
};

/// Kolmogorov tail Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);

/// One-sample Kolmogorov-Smirnov test of `samples` against `cdf`.
KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf);

double normal_cdf(double z);
double normal_quantile(double u);

/// Upper tail of the chi-square distribution.
double chi_square_sf(double statistic, double dof);

struct ChiSquareResult {
  double statistic = 0;
  double dof = 0;
  double p_value = 0;
};

/// Pearson independence test on a 2x2 contingency table (no continuity correction).
ChiSquareResult independence_2x2(const std::uint64_t table[2][2]);

/// Pearson goodness of fit of observed counts against expected counts.
ChiSquareResult goodness_of_fit(std::span<const double> observed, std::span<const double> expected,
                                int fitted_parameters = 0);

/// 3-sigma binomial radius sqrt(p(1-p)/n) * 3.
double binomial_radius(double p, std::uint64_t n, double n_sigma = 3.0);

/// SplitMix64 finalizer, used to derive per-run seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed of run `index` under base seed `base`: splitmix64(base ^ index).
inline std::uint64_t run_seed(std::uint64_t base, std::uint64_t index) { return splitmix64(base ^ index); }

}  // namespace pilotwave::stats
