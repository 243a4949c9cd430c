#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace exactq {

// Stationary number-in-system pmf of M/M/c over {0..K}, renormalized, with
// the discarded tail mass reported.
struct ErlangPmf {
    std::vector<double> pmf;
    double tail_mass = 0;
};
ErlangPmf erlang_pmf(double lambda, double mu, int c, int k_max);

struct GofResult {
    double statistic = 0;
    double p_value = 1;
    int dof = 0;
};

// Upper tail of chi-square with `dof` degrees of freedom (regularized
// incomplete gamma Q(dof/2, x/2)).
double chi_square_sf(double x, int dof);
// Kolmogorov distribution tail Q(lambda) = 2 sum (-1)^{k-1} e^{-2 k^2 lambda^2}.
double kolmogorov_sf(double lambda);
double normal_sf(double z);

// Chi-square GOF of integer samples against a reference pmf over {0..K};
// bins are merged from the tail until every expected count is >= 5.
GofResult chi_square_gof(const std::vector<int64_t>& samples, const std::vector<double>& pmf);

// Two-sample homogeneity chi-square on integer data, same merging rule.
GofResult chi_square_two_sample(const std::vector<int64_t>& a, const std::vector<int64_t>& b);

// One-sample Kolmogorov-Smirnov against a cdf callable. For laws with atoms
// pass the left-limit cdf as well, so the lower deviation is measured against
// G(x-) rather than G(x).
GofResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf);
GofResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf,
                  const std::function<double(double)>& cdf_left);

GofResult ks_two_sample(std::vector<double> a, std::vector<double> b);

struct MeanCi {
    double mean = 0;
    double half_width = 0;  // 95%, normal approximation
    int64_t n = 0;
};
MeanCi mean_ci95(const std::vector<double>& xs);

}  // namespace exactq
