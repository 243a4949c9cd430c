#pragma once

#include <string>
#include <vector>

#include "exactq/rng.hpp"

#include <nlohmann/json_fwd.hpp>

namespace exactq {

enum class Family {
    exponential,            // params: rate
    uniform,                // params: lo, hi
    shifted_exponential,    // params: shift, rate
    deterministic_plus_jitter,  // params: base, jitter; base + U[0, jitter]
    user_table,             // piecewise-linear density on a grid
};

std::string family_name(Family f);

// An interarrival or service law together with everything the samplers need
// from it: moments, support, transforms, and the tilted variants used by the
// walk engine. Immutable after construction; safe to share across threads.
class DistributionSpec {
public:
    // Default state is a unit-rate exponential; containers and config structs
    // overwrite it before use.
    DistributionSpec() : DistributionSpec(exponential(1.0)) {}

    static DistributionSpec exponential(double rate);
    static DistributionSpec uniform(double lo, double hi);
    static DistributionSpec shifted_exponential(double shift, double rate);
    static DistributionSpec deterministic_plus_jitter(double base, double jitter);
    static DistributionSpec user_table(std::vector<double> x, std::vector<double> pdf);

    // Config schema: {"family": <name>, "params": [...]} or
    // {"family": "table", "table": {"x": [...], "pdf": [...]}}.
    static DistributionSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    Family family() const { return family_; }
    const std::vector<double>& params() const { return params_; }
    double mean() const { return mean_; }
    double variance() const { return variance_; }
    double second_moment() const { return variance_ + mean_ * mean_; }
    double support_lo() const { return lo_; }
    double support_hi() const { return hi_; }  // +inf for unbounded laws

    double pdf(double x) const;
    double cdf(double x) const;
    double sf(double x) const;  // P(X > x), computed directly for tail accuracy
    double quantile(double u) const;

    // E[e^{-theta X}] for theta >= 0.
    double laplace(double theta) const;
    // E[e^{-theta X} 1{X < b}]; with e^{-theta b} sf(b) this gives the
    // transform of the truncated variable min(X, b).
    double laplace_below(double theta, double b) const;
    // log E[e^{eta X}]; false when the transform diverges at eta.
    bool log_mgf(double eta, double& out) const;
    // H(x) = int_0^x P(X > y) dy; H(inf) = mean.
    double integrated_tail(double x) const;

    double sample(RngStream& rng) const;
    // Density proportional to e^{-theta x} pdf(x) (theta > 0).
    double sample_tilted_down(double theta, RngStream& rng) const;
    // Density proportional to e^{+eta x} pdf(x) (eta > 0, mgf finite at eta).
    double sample_tilted_up(double eta, RngStream& rng) const;
    // Equilibrium (integrated-tail) law: density P(X > y) / mean.
    double sample_equilibrium(RngStream& rng) const;

    std::string describe() const;

private:
    struct raw_t {};
    explicit DistributionSpec(raw_t) {}
    void finalize_table();

    Family family_ = Family::exponential;
    std::vector<double> params_;
    double mean_ = 0, variance_ = 0, lo_ = 0, hi_ = 0;

    // Table-family state: knots, density values, and prefix integrals of the
    // density and of x * density (for cdf / moments / integrated tail).
    std::vector<double> tx_, tp_, tcdf_, txint_;
};

}  // namespace exactq
