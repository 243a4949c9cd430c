#include "exactq/stats.hpp"

#include <algorithm>
#include <cmath>

#include "exactq/errors.hpp"

namespace exactq {

ErlangPmf erlang_pmf(double lambda, double mu, int c, int k_max) {
    if (!(lambda > 0 && mu > 0 && c >= 1)) throw InvalidParametersError("erlang_pmf parameters");
    if (!(lambda < c * mu)) throw UnstableError("lambda >= c mu");
    const double r = lambda / (c * mu);
    std::vector<double> u(k_max + 1);
    u[0] = 1;
    for (int n = 1; n <= k_max; ++n) u[n] = u[n - 1] * lambda / (mu * std::min(n, c));
    // Tail beyond k_max is geometric with ratio r once n >= c.
    double z = 0;
    for (double x : u) z += x;
    double tail = 0;
    if (k_max >= c) tail = u[k_max] * r / (1 - r);
    z += tail;
    ErlangPmf out;
    out.tail_mass = tail / z;
    out.pmf.resize(k_max + 1);
    const double kept = z - tail;
    for (int n = 0; n <= k_max; ++n) out.pmf[n] = u[n] / kept;
    return out;
}

namespace {

// Regularized incomplete gamma Q(a, x): series for x < a+1, Lentz continued
// fraction otherwise.
double igamc(double a, double x) {
    if (x <= 0) return 1.0;
    const double lg = std::lgamma(a);
    if (x < a + 1) {
        double sum = 1.0 / a, term = sum;
        for (int n = 1; n < 1000; ++n) {
            term *= x / (a + n);
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-16) break;
        }
        const double p = sum * std::exp(-x + a * std::log(x) - lg);
        return 1.0 - p;
    }
    const double tiny = 1e-300;
    double b = x + 1 - a, cfr = 1 / tiny, d = 1 / b, h = d;
    for (int i = 1; i < 1000; ++i) {
        const double an = -static_cast<double>(i) * (i - a);
        b += 2;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        cfr = b + an / cfr;
        if (std::abs(cfr) < tiny) cfr = tiny;
        d = 1 / d;
        const double del = d * cfr;
        h *= del;
        if (std::abs(del - 1) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - lg) * h;
}

}  // namespace

double chi_square_sf(double x, int dof) { return igamc(dof / 2.0, x / 2.0); }

double kolmogorov_sf(double lambda) {
    if (lambda < 0.05) return 1.0;
    double sum = 0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 ? term : -term);
        if (term < 1e-16) break;
    }
    return std::clamp(2 * sum, 0.0, 1.0);
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

namespace {

// Merge trailing bins until every expected count reaches 5.
std::vector<std::pair<int, int>> merged_bins(const std::vector<double>& expected) {
    std::vector<std::pair<int, int>> bins;
    const int k = static_cast<int>(expected.size());
    int start = 0;
    double acc = 0;
    for (int i = 0; i < k; ++i) {
        acc += expected[i];
        if (acc >= 5.0) {
            bins.emplace_back(start, i);
            start = i + 1;
            acc = 0;
        }
    }
    if (start < k) {
        if (bins.empty())
            bins.emplace_back(start, k - 1);
        else
            bins.back().second = k - 1;
    }
    return bins;
}

}  // namespace

GofResult chi_square_gof(const std::vector<int64_t>& samples, const std::vector<double>& pmf) {
    const int64_t n = static_cast<int64_t>(samples.size());
    if (n < 100) throw InsufficientDataError("chi-square needs n >= 100");
    const int k = static_cast<int>(pmf.size());
    std::vector<double> expected(k);
    for (int i = 0; i < k; ++i) expected[i] = pmf[i] * n;
    std::vector<int64_t> counts(k, 0);
    for (int64_t s : samples) counts[std::clamp<int64_t>(s, 0, k - 1)]++;

    const auto bins = merged_bins(expected);
    if (bins.size() < 2) throw InsufficientDataError("fewer than two usable chi-square bins");
    double stat = 0;
    for (const auto& [lo, hi] : bins) {
        double e = 0, o = 0;
        for (int i = lo; i <= hi; ++i) {
            e += expected[i];
            o += counts[i];
        }
        stat += (o - e) * (o - e) / e;
    }
    const int dof = static_cast<int>(bins.size()) - 1;
    return {stat, chi_square_sf(stat, dof), dof};
}

GofResult chi_square_two_sample(const std::vector<int64_t>& a, const std::vector<int64_t>& b) {
    const double na = a.size(), nb = b.size();
    if (na < 100 || nb < 100) throw InsufficientDataError("two-sample chi-square needs n >= 100");
    int64_t kmax = 0;
    for (int64_t s : a) kmax = std::max(kmax, s);
    for (int64_t s : b) kmax = std::max(kmax, s);
    const int k = static_cast<int>(kmax) + 1;
    std::vector<double> ca(k, 0), cb(k, 0), pooled(k, 0);
    for (int64_t s : a) ca[s]++;
    for (int64_t s : b) cb[s]++;
    // Merge on the smaller side's expected counts so both sides clear 5.
    const double scale = std::min(na, nb) / (na + nb);
    for (int i = 0; i < k; ++i) pooled[i] = (ca[i] + cb[i]) * scale;
    const auto bins = merged_bins(pooled);
    if (bins.size() < 2) throw InsufficientDataError("fewer than two usable chi-square bins");
    double stat = 0;
    for (const auto& [lo, hi] : bins) {
        double oa = 0, ob = 0;
        for (int i = lo; i <= hi; ++i) {
            oa += ca[i];
            ob += cb[i];
        }
        const double ea = (oa + ob) * na / (na + nb);
        const double eb = (oa + ob) * nb / (na + nb);
        stat += (oa - ea) * (oa - ea) / ea + (ob - eb) * (ob - eb) / eb;
    }
    const int dof = static_cast<int>(bins.size()) - 1;
    return {stat, chi_square_sf(stat, dof), dof};
}

GofResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
    return ks_test(std::move(samples), cdf, cdf);
}

GofResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf,
                  const std::function<double(double)>& cdf_left) {
    const double n = static_cast<double>(samples.size());
    std::sort(samples.begin(), samples.end());
    double d = 0;
    size_t i = 0;
    while (i < samples.size()) {
        size_t j = i;
        while (j < samples.size() && samples[j] == samples[i]) ++j;
        // F jumps from i/n to j/n at this value.
        d = std::max(d, std::abs(j / n - cdf(samples[i])));
        d = std::max(d, std::abs(i / n - cdf_left(samples[i])));
        i = j;
    }
    const double en = std::sqrt(n);
    return {d, kolmogorov_sf((en + 0.12 + 0.11 / en) * d), 0};
}

GofResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = a.size(), nb = b.size();
    double d = 0;
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    const double en = std::sqrt(na * nb / (na + nb));
    return {d, kolmogorov_sf((en + 0.12 + 0.11 / en) * d), 0};
}

MeanCi mean_ci95(const std::vector<double>& xs) {
    MeanCi out;
    out.n = static_cast<int64_t>(xs.size());
    if (out.n == 0) return out;
    double s = 0;
    for (double x : xs) s += x;
    out.mean = s / out.n;
    if (out.n < 2) return out;
    double v = 0;
    for (double x : xs) v += (x - out.mean) * (x - out.mean);
    v /= (out.n - 1);
    out.half_width = 1.959963984540054 * std::sqrt(v / out.n);
    return out;
}

}  // namespace exactq
