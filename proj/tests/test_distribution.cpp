#include <doctest.h>

#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "exactq/distribution.hpp"
#include "exactq/errors.hpp"
#include "exactq/stats.hpp"

using namespace exactq;

namespace {

std::vector<DistributionSpec> builtin_zoo() {
    return {
        DistributionSpec::exponential(3.0),
        DistributionSpec::uniform(0.0, 0.8),
        DistributionSpec::uniform(0.2, 0.9),
        DistributionSpec::shifted_exponential(1.0, 4.0),
        DistributionSpec::deterministic_plus_jitter(0.5, 0.3),
        DistributionSpec::user_table({0.0, 1.0, 2.0}, {0.0, 1.0, 0.0}),  // triangular on [0,2]
    };
}

// Simpson quadrature over the (possibly truncated) support.
double quad(const DistributionSpec& d, const std::function<double(double)>& f) {
    const double lo = d.support_lo();
    const double hi = std::isfinite(d.support_hi()) ? d.support_hi()
                                                    : lo + 60.0 * (d.mean() - lo + 1.0);
    const int n = 40000;
    const double h = (hi - lo) / n;
    double acc = 0;
    for (int i = 0; i <= n; ++i) {
        const double x = lo + i * h;
        const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
        acc += w * f(x) * d.pdf(x);
    }
    return acc * h / 3;
}

}  // namespace

TEST_CASE("densities integrate to one and match the declared moments") {
    for (const auto& d : builtin_zoo()) {
        CAPTURE(d.describe());
        CHECK(quad(d, [](double) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(quad(d, [](double x) { return x; }) == doctest::Approx(d.mean()).epsilon(1e-6));
        const double m2 = quad(d, [](double x) { return x * x; });
        CHECK(m2 - d.mean() * d.mean() == doctest::Approx(d.variance()).epsilon(1e-5));
    }
}

TEST_CASE("laplace transform: known values") {
    CHECK(DistributionSpec::exponential(3.0).laplace(1.0) == doctest::Approx(0.75).epsilon(1e-12));
    for (const auto& d : builtin_zoo()) CHECK(d.laplace(0.0) == 1.0);
    const auto u = DistributionSpec::uniform(0.0, 0.8);
    const double theta = 2.3;
    CHECK(u.laplace(theta) ==
          doctest::Approx((1 - std::exp(-theta * 0.8)) / (theta * 0.8)).epsilon(1e-12));
}

TEST_CASE("laplace transform is positive, at most one, nonincreasing") {
    for (const auto& d : builtin_zoo()) {
        CAPTURE(d.describe());
        double prev = 1.0;
        for (double theta : {0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0}) {
            const double v = d.laplace(theta);
            CHECK(v > 0.0);
            CHECK(v <= 1.0);
            CHECK(v <= prev + 1e-15);
            prev = v;
            // Cross-check against quadrature of e^{-theta x} pdf.
            const double q = quad(d, [&](double x) { return std::exp(-theta * x); });
            CHECK(v == doctest::Approx(q).epsilon(1e-6));
        }
    }
}

TEST_CASE("laplace_below splits the transform at the truncation point") {
    for (const auto& d : builtin_zoo()) {
        CAPTURE(d.describe());
        for (double theta : {0.3, 1.7}) {
            const double b = d.mean() * 1.2;
            const double whole = d.laplace_below(theta, b) + std::exp(-theta * b) * d.sf(b);
            // E e^{-theta min(X,b)} computed by quadrature.
            const double q = quad(d, [&](double x) { return std::exp(-theta * std::min(x, b)); });
            CHECK(whole == doctest::Approx(q).epsilon(1e-6));
            const double far = 10 * (d.mean() + 1) * (std::isfinite(d.support_hi()) ? 1.0 : 6.0);
            CHECK(d.laplace_below(theta, far) == doctest::Approx(d.laplace(theta)).epsilon(1e-9));
        }
    }
}

TEST_CASE("log mgf agrees with quadrature inside its domain and reports divergence") {
    const auto e = DistributionSpec::exponential(3.0);
    double out;
    CHECK(e.log_mgf(1.0, out));
    CHECK(out == doctest::Approx(std::log(3.0 / 2.0)).epsilon(1e-12));
    CHECK_FALSE(e.log_mgf(3.0, out));
    CHECK_FALSE(e.log_mgf(4.0, out));
    for (const auto& d : builtin_zoo()) {
        CAPTURE(d.describe());
        const double eta = 0.4;
        if (d.log_mgf(eta, out)) {
            const double q = quad(d, [&](double x) { return std::exp(eta * x); });
            CHECK(out == doctest::Approx(std::log(q)).epsilon(1e-6));
        }
    }
}

TEST_CASE("sampling matches the cdf (KS)") {
    for (const auto& d : builtin_zoo()) {
        CAPTURE(d.describe());
        RngStream rng(11, 0, stream_role::harness);
        std::vector<double> xs(20000);
        for (auto& x : xs) x = d.sample(rng);
        const auto r = ks_test(xs, [&](double x) { return d.cdf(x); });
        CHECK(r.p_value > 0.01);
    }
}

TEST_CASE("tilted-down samples follow e^{-theta x} pdf(x)") {
    for (const auto& d : builtin_zoo()) {
        CAPTURE(d.describe());
        const double theta = 0.9;
        RngStream rng(13, 0, stream_role::harness);
        std::vector<double> xs(10000);
        for (auto& x : xs) x = d.sample_tilted_down(theta, rng);
        const double norm = d.laplace(theta);
        // cdf of the tilted law by quadrature of the un-normalized density.
        const auto r = ks_test(xs, [&](double x) {
            return quad(d, [&](double y) { return y <= x ? std::exp(-theta * y) : 0.0; }) / norm;
        });
        CHECK(r.p_value > 0.01);
    }
}

TEST_CASE("tilted-up samples follow e^{+eta x} pdf(x)") {
    for (const auto& d : builtin_zoo()) {
        CAPTURE(d.describe());
        const double eta = 0.8;
        double lm;
        REQUIRE(d.log_mgf(eta, lm));
        RngStream rng(17, 0, stream_role::harness);
        std::vector<double> xs(10000);
        for (auto& x : xs) x = d.sample_tilted_up(eta, rng);
        const double norm = std::exp(lm);
        const auto r = ks_test(xs, [&](double x) {
            return quad(d, [&](double y) { return y <= x ? std::exp(eta * y) : 0.0; }) / norm;
        });
        CHECK(r.p_value > 0.01);
    }
}

TEST_CASE("equilibrium law: exponential fixed point") {
    const auto e = DistributionSpec::exponential(2.0);
    RngStream rng(19, 0, stream_role::harness);
    std::vector<double> xs(20000);
    for (auto& x : xs) x = e.sample_equilibrium(rng);
    const auto r = ks_test(xs, [&](double x) { return 1.0 - std::exp(-2.0 * x); });
    CHECK(r.p_value > 0.01);
}

TEST_CASE("equilibrium law: uniform[0,b] has density (2/b)(1-y/b) and mean b/3") {
    const double b = 0.8;
    const auto u = DistributionSpec::uniform(0.0, b);
    RngStream rng(23, 0, stream_role::harness);
    std::vector<double> xs(20000);
    double mean = 0;
    for (auto& x : xs) mean += (x = u.sample_equilibrium(rng));
    mean /= xs.size();
    CHECK(mean == doctest::Approx(b / 3).epsilon(0.02));
    const auto r =
        ks_test(xs, [&](double y) { return y <= 0 ? 0.0 : y >= b ? 1.0 : 2 * y / b - y * y / (b * b); });
    CHECK(r.p_value > 0.01);
}

TEST_CASE("equilibrium mean is E X^2 / (2 E X) for every family") {
    for (const auto& d : builtin_zoo()) {
        CAPTURE(d.describe());
        RngStream rng(29, 0, stream_role::harness);
        const int n = 40000;
        double s = 0, s2 = 0;
        for (int i = 0; i < n; ++i) {
            const double x = d.sample_equilibrium(rng);
            s += x;
            s2 += x * x;
        }
        const double want = d.second_moment() / (2 * d.mean());
        const double se = std::sqrt((s2 / n - (s / n) * (s / n)) / n);
        CHECK(std::abs(s / n - want) < 5 * se + 1e-9);
    }
}

TEST_CASE("table family rejects malformed input") {
    CHECK_THROWS_AS(DistributionSpec::user_table({0.0, 1.0}, {1.0, 1.5}),
                    InvalidParametersError);  // integrates to 1.25
    CHECK_THROWS_AS(DistributionSpec::user_table({1.0, 0.5}, {1.0, 1.0}), InvalidParametersError);
    CHECK_THROWS_AS(DistributionSpec::user_table({0.0, 1.0}, {-0.1, 2.1}), InvalidParametersError);
}

TEST_CASE("json round trip preserves the law") {
    for (const auto& d : builtin_zoo()) {
        const auto back = DistributionSpec::from_json(d.to_json());
        CHECK(back.mean() == doctest::Approx(d.mean()).epsilon(1e-12));
        CHECK(back.variance() == doctest::Approx(d.variance()).epsilon(1e-12));
        CHECK(back.laplace(1.3) == doctest::Approx(d.laplace(1.3)).epsilon(1e-12));
    }
}
