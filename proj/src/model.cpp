#include "exactq/model.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "exactq/errors.hpp"

namespace exactq {

bool supports_emptiable(const DistributionSpec& arrival, const DistributionSpec& service) {
    return arrival.support_hi() > service.support_lo();
}

ModelSpec build_model(const DistributionSpec& arrival, const DistributionSpec& service, int c) {
    if (c < 1) throw InvalidParametersError("server count must be >= 1");
    ModelSpec m{arrival, service, c, 0, false};
    m.rho = service.mean() / arrival.mean();
    if (!(m.rho < c)) {
        std::ostringstream os;
        os << "rho = " << m.rho << " >= c = " << c;
        throw UnstableError(os.str());
    }
    m.emptiable = supports_emptiable(arrival, service);
    return m;
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
    return build_model(DistributionSpec::from_json(j.at("arrival")),
                       DistributionSpec::from_json(j.at("service")), j.at("c").get<int>());
}

nlohmann::json ModelSpec::to_json() const {
    return {{"arrival", arrival.to_json()}, {"service", service.to_json()}, {"c", c}};
}

double phi_y(const ModelSpec& model, double a, double theta, double truncation_b) {
    // E e^{theta a 1{U=i}} = (e^{theta a} - 1)/c + 1, independent of T.
    const double lap =
        truncation_b > 0
            ? model.arrival.laplace_below(theta, truncation_b) +
                  std::exp(-theta * truncation_b) * model.arrival.sf(truncation_b)
            : model.arrival.laplace(theta);
    return std::log1p(std::expm1(theta * a) / model.c) + std::log(lap);
}

bool psi_x(const ModelSpec& model, double a, double eta, double& out) {
    double lm;
    if (!model.service.log_mgf(eta, lm)) return false;
    out = lm - eta * a;
    return true;
}

namespace {

// Bracket-and-bisect the unique positive root of an eventually-increasing
// smooth function with f(0)=0, f'(0)<0. `domain_hi` caps the bracket when the
// transform has a finite singularity.
double positive_root(const std::function<bool(double, double&)>& f, double domain_hi,
                     const char* what) {
    double lo = 1e-9, flo;
    if (!f(lo, flo) || flo >= 0) {
        // Extremely steep case: shrink toward 0 looking for the negative side.
        bool found = false;
        for (double t = lo / 2; t > 1e-300; t /= 2) {
            if (f(t, flo) && flo < 0) {
                lo = t;
                found = true;
                break;
            }
        }
        if (!found) throw NoRootError(std::string(what) + ": no negative segment near 0");
    }
    double hi = std::min(1.0, 0.5 * domain_hi), fhi;
    bool bracketed = false;
    for (int it = 0; it < 200; ++it) {
        if (f(hi, fhi) && fhi > 0) {
            bracketed = true;
            break;
        }
        hi = std::isfinite(domain_hi) ? 0.5 * (hi + domain_hi) : hi * 2;
        if (!std::isfinite(hi)) break;
    }
    if (!bracketed)
        throw NoRootError(std::string(what) + ": no sign change within expansion budget");
    for (int it = 0; it < 200 && (hi - lo) > 0; ++it) {
        const double mid = 0.5 * (lo + hi);
        double fm;
        if (!f(mid, fm) || fm > 0)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

double TiltContext::tilted_direction_prob() const {
    const double e = std::exp(theta_star * a);
    return e / (e + c - 1);
}

TiltContext solve_tilt(const ModelSpec& model, double a) {
    TiltOptions o;
    o.drift_a = a;
    return solve_tilt(model, o);
}

TiltContext solve_tilt(const ModelSpec& model, const TiltOptions& opts) {
    const double trunc = opts.truncation_b;
    const double inv_mu = model.service.mean();
    // With truncation active the walk drifts by a/c - E min(T,b).
    const double arrival_mean =
        trunc > 0 ? model.arrival.integrated_tail(trunc) : model.arrival.mean();
    const double c_over_lambda = model.c * arrival_mean;
    const double t_lo = model.arrival.support_lo();
    const double t_hi = trunc > 0 ? std::min(model.arrival.support_hi(), trunc)
                                  : model.arrival.support_hi();
    const double s_hi = model.service.support_hi();

    double a;
    if (opts.drift_a) {
        a = *opts.drift_a;
        if (!(a > inv_mu && a < c_over_lambda)) {
            std::ostringstream os;
            os << "a = " << a << " outside (1/mu, c/lambda) = (" << inv_mu << ", " << c_over_lambda << ")";
            throw InvalidDriftConstantError(os.str());
        }
    } else {
        a = 0.5 * (inv_mu + c_over_lambda);
        // The roots additionally need a > inf-support(T) (phi recrosses zero)
        // and a < sup-support(S) (psi recrosses zero); nudge inside the
        // feasible sub-interval when the plain midpoint misses it.
        double lo = std::max(inv_mu, t_lo);
        double hi = std::min(c_over_lambda, s_hi);
        if (opts.require_joint_records) hi = std::min(hi, t_hi);
        if (!(lo < hi)) {
            std::ostringstream os;
            os << "no drift constant satisfies 1/mu < a < c/lambda with a > " << t_lo
               << " (arrival inf-support) and a < " << hi << " (service sup / arrival sup)";
            throw InvalidDriftConstantError(os.str());
        }
        if (!(a > lo && a < hi)) a = 0.5 * (lo + hi);
    }

    TiltContext ctx;
    ctx.c = model.c;
    ctx.a = a;
    ctx.truncation_b = trunc;
    ctx.joint_records_available = model.arrival.sf(a) > 0 && a < t_hi;
    if (opts.require_joint_records && !ctx.joint_records_available)
        throw InvalidDriftConstantError("P(T > a) = 0: joint record sets would be empty; pick smaller a or use the Harris sampler");

    ctx.theta_star = positive_root(
        [&](double th, double& out) {
            out = phi_y(model, a, th, trunc);
            return std::isfinite(out);
        },
        std::numeric_limits<double>::infinity(), "phi");
    {
        const double resid = phi_y(model, a, ctx.theta_star, trunc);
        EXACTQ_CHECK(std::abs(resid) <= 1e-12, "phi(theta*) residual above tolerance");
    }

    // Scalar walk root; the arrival side drops out of psi.
    ctx.eta_star = positive_root(
        [&](double et, double& out) { return psi_x(model, a, et, out); },
        [&] {
            // Find the mgf blow-up point by doubling until divergence.
            double hi = 1.0, dummy;
            if (!model.service.log_mgf(hi, dummy)) {
                double lo = 0;
                for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (model.service.log_mgf(mid, dummy) ? lo : hi) = mid;
                }
                return lo;
            }
            while (model.service.log_mgf(hi * 2, dummy) && hi < 1e300) hi *= 2;
            return hi * 2;
        }(),
        "psi");
    {
        double resid;
        EXACTQ_CHECK(psi_x(model, a, ctx.eta_star, resid) && std::abs(resid) <= 1e-12,
                     "psi(eta*) residual above tolerance");
    }

    ctx.m = std::log(static_cast<double>(model.c)) / ctx.theta_star + opts.m_slack;
    ctx.m_prime = opts.m_prime_scale / ctx.eta_star;
    ctx.l_prime = opts.l_prime;
    EXACTQ_CHECK(ctx.m > std::log(static_cast<double>(model.c)) / ctx.theta_star,
                 "milestone height must exceed ln(c)/theta*");
    EXACTQ_CHECK(model.c * std::exp(-ctx.theta_star * ctx.m) < 1.0,
                 "up-crossing acceptance bound must be < 1");
    return ctx;
}

int sample_tilted_direction(const TiltContext& ctx, int index, RngStream& rng) {
    if (ctx.c == 1) return 0;
    if (rng.uniform() < ctx.tilted_direction_prob()) return index;
    int u = rng.uniform_int(ctx.c - 1);
    if (u >= index) ++u;
    return u;
}

std::pair<int, double> sample_tilted_step(const TiltContext& ctx, int index, const ModelSpec& model,
                                          RngStream& rng) {
    const int u = sample_tilted_direction(ctx, index, rng);
    const double t = model.arrival.sample_tilted_down(ctx.theta_star, rng);
    return {u, t};
}

}  // namespace exactq
