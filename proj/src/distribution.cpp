#include "exactq/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "exactq/errors.hpp"

namespace exactq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// int_{x0}^{x1} e^{k t} (p0 + s (t - x0)) dt with s the density slope.
// `shift` rescales by e^{-shift} to keep large-k table transforms in range.
double exp_linear_integral(double x0, double x1, double p0, double p1, double k, double shift = 0.0) {
    const double w = x1 - x0;
    if (w <= 0) return 0.0;
    const double s = (p1 - p0) / w;
    if (std::abs(k * w) < 1e-8) {
        // Trapezoid plus first-order correction in k.
        const double base = 0.5 * (p0 + p1) * w;
        const double xm = 0.5 * (x0 + x1);
        return std::exp(k * xm - shift) * base;
    }
    // Antiderivative of e^{kt}(a + b t): e^{kt}((a + b t)/k - b/k^2).
    const double a = p0 - s * x0;
    const double b = s;
    auto prim = [&](double t) {
        return std::exp(k * t - shift) * ((a + b * t) / k - b / (k * k));
    };
    return prim(x1) - prim(x0);
}

double log_expm1_over(double z) {
    // log((e^z - 1)/z) for z > 0, stable across magnitudes.
    if (z < 1e-8) return std::log1p(z / 2 + z * z / 12);
    if (z > 700) return z - std::log(z);
    return std::log(std::expm1(z) / z);
}

}  // namespace

std::string family_name(Family f) {
    switch (f) {
        case Family::exponential: return "exponential";
        case Family::uniform: return "uniform";
        case Family::shifted_exponential: return "shifted-exponential";
        case Family::deterministic_plus_jitter: return "deterministic-plus-jitter";
        case Family::user_table: return "table";
    }
    return "?";
}

DistributionSpec DistributionSpec::exponential(double rate) {
    if (!(rate > 0)) throw InvalidParametersError("exponential rate must be > 0");
    DistributionSpec d{raw_t{}};
    d.family_ = Family::exponential;
    d.params_ = {rate};
    d.mean_ = 1.0 / rate;
    d.variance_ = 1.0 / (rate * rate);
    d.lo_ = 0;
    d.hi_ = kInf;
    return d;
}

DistributionSpec DistributionSpec::uniform(double lo, double hi) {
    if (!(lo >= 0 && hi > lo)) throw InvalidParametersError("uniform needs 0 <= lo < hi");
    DistributionSpec d{raw_t{}};
    d.family_ = Family::uniform;
    d.params_ = {lo, hi};
    d.mean_ = 0.5 * (lo + hi);
    d.variance_ = (hi - lo) * (hi - lo) / 12.0;
    d.lo_ = lo;
    d.hi_ = hi;
    return d;
}

DistributionSpec DistributionSpec::shifted_exponential(double shift, double rate) {
    if (!(shift >= 0 && rate > 0)) throw InvalidParametersError("shifted-exponential needs shift >= 0, rate > 0");
    DistributionSpec d{raw_t{}};
    d.family_ = Family::shifted_exponential;
    d.params_ = {shift, rate};
    d.mean_ = shift + 1.0 / rate;
    d.variance_ = 1.0 / (rate * rate);
    d.lo_ = shift;
    d.hi_ = kInf;
    return d;
}

DistributionSpec DistributionSpec::deterministic_plus_jitter(double base, double jitter) {
    if (!(base >= 0 && jitter > 0)) throw InvalidParametersError("deterministic-plus-jitter needs base >= 0, jitter > 0");
    DistributionSpec d{raw_t{}};
    d.family_ = Family::deterministic_plus_jitter;
    d.params_ = {base, jitter};
    d.mean_ = base + 0.5 * jitter;
    d.variance_ = jitter * jitter / 12.0;
    d.lo_ = base;
    d.hi_ = base + jitter;
    return d;
}

DistributionSpec DistributionSpec::user_table(std::vector<double> x, std::vector<double> pdf) {
    if (x.size() < 2 || x.size() != pdf.size())
        throw InvalidParametersError("table needs matching x/pdf arrays with >= 2 points");
    for (size_t i = 0; i < x.size(); ++i) {
        if (pdf[i] < 0) throw InvalidParametersError("table density must be nonnegative");
        if (i > 0 && !(x[i] > x[i - 1])) throw InvalidParametersError("table grid must be strictly increasing");
    }
    if (x.front() < 0) throw InvalidParametersError("table support must be nonnegative");
    DistributionSpec d{raw_t{}};
    d.family_ = Family::user_table;
    d.tx_ = std::move(x);
    d.tp_ = std::move(pdf);
    d.finalize_table();
    return d;
}

void DistributionSpec::finalize_table() {
    const size_t n = tx_.size();
    double total = 0;
    for (size_t i = 0; i + 1 < n; ++i) total += 0.5 * (tp_[i] + tp_[i + 1]) * (tx_[i + 1] - tx_[i]);
    if (std::abs(total - 1.0) > 1e-6)
        throw InvalidParametersError("table density integrates to " + std::to_string(total) + ", not 1 (tolerance 1e-6)");
    for (auto& p : tp_) p /= total;

    tcdf_.assign(n, 0.0);
    txint_.assign(n, 0.0);
    double m1 = 0, m2 = 0;
    for (size_t i = 0; i + 1 < n; ++i) {
        const double w = tx_[i + 1] - tx_[i];
        const double mass = 0.5 * (tp_[i] + tp_[i + 1]) * w;
        tcdf_[i + 1] = tcdf_[i] + mass;
        // Exact segment moments of the linear density piece.
        const double s = (tp_[i + 1] - tp_[i]) / w;
        const double a = tp_[i] - s * tx_[i];
        auto prim1 = [&](double t) { return a * t * t / 2 + s * t * t * t / 3; };
        auto prim2 = [&](double t) { return a * t * t * t / 3 + s * t * t * t * t / 4; };
        const double seg1 = prim1(tx_[i + 1]) - prim1(tx_[i]);
        m1 += seg1;
        m2 += prim2(tx_[i + 1]) - prim2(tx_[i]);
        txint_[i + 1] = txint_[i] + seg1;
    }
    tcdf_.back() = 1.0;
    mean_ = m1;
    variance_ = m2 - m1 * m1;
    lo_ = tx_.front();
    hi_ = tx_.back();
    if (!(mean_ > 0)) throw InvalidParametersError("table mean must be positive");
    params_.clear();
}

double DistributionSpec::pdf(double x) const {
    switch (family_) {
        case Family::exponential: {
            const double r = params_[0];
            return x < 0 ? 0.0 : r * std::exp(-r * x);
        }
        case Family::uniform:
        case Family::deterministic_plus_jitter:
            return (x < lo_ || x > hi_) ? 0.0 : 1.0 / (hi_ - lo_);
        case Family::shifted_exponential: {
            const double s0 = params_[0], r = params_[1];
            return x < s0 ? 0.0 : r * std::exp(-r * (x - s0));
        }
        case Family::user_table: {
            if (x < lo_ || x > hi_) return 0.0;
            const auto it = std::upper_bound(tx_.begin(), tx_.end(), x);
            const size_t i = std::min(tx_.size() - 2, static_cast<size_t>(std::max<long>(0, it - tx_.begin() - 1)));
            const double t = (x - tx_[i]) / (tx_[i + 1] - tx_[i]);
            return tp_[i] + t * (tp_[i + 1] - tp_[i]);
        }
    }
    return 0;
}

double DistributionSpec::cdf(double x) const {
    if (x <= lo_) return x < lo_ ? 0.0 : (family_ == Family::user_table ? 0.0 : 0.0);
    switch (family_) {
        case Family::exponential:
            return -std::expm1(-params_[0] * x);
        case Family::uniform:
        case Family::deterministic_plus_jitter:
            return x >= hi_ ? 1.0 : (x - lo_) / (hi_ - lo_);
        case Family::shifted_exponential:
            return -std::expm1(-params_[1] * (x - params_[0]));
        case Family::user_table: {
            if (x >= hi_) return 1.0;
            const auto it = std::upper_bound(tx_.begin(), tx_.end(), x);
            const size_t i = static_cast<size_t>(it - tx_.begin()) - 1;
            const double w = tx_[i + 1] - tx_[i];
            const double z = x - tx_[i];
            const double s = (tp_[i + 1] - tp_[i]) / w;
            return tcdf_[i] + tp_[i] * z + 0.5 * s * z * z;
        }
    }
    return 0;
}

double DistributionSpec::sf(double x) const {
    switch (family_) {
        case Family::exponential:
            return x <= 0 ? 1.0 : std::exp(-params_[0] * x);
        case Family::shifted_exponential:
            return x <= params_[0] ? 1.0 : std::exp(-params_[1] * (x - params_[0]));
        default:
            return 1.0 - cdf(x);
    }
}

double DistributionSpec::quantile(double u) const {
    switch (family_) {
        case Family::exponential:
            return -std::log1p(-u) / params_[0];
        case Family::uniform:
        case Family::deterministic_plus_jitter:
            return lo_ + u * (hi_ - lo_);
        case Family::shifted_exponential:
            return params_[0] - std::log1p(-u) / params_[1];
        case Family::user_table: {
            const auto it = std::upper_bound(tcdf_.begin(), tcdf_.end(), u);
            size_t i = static_cast<size_t>(std::max<long>(0, it - tcdf_.begin() - 1));
            i = std::min(i, tx_.size() - 2);
            const double w = tx_[i + 1] - tx_[i];
            const double s = (tp_[i + 1] - tp_[i]) / w;
            const double du = u - tcdf_[i];
            // Solve p0 z + s z^2 / 2 = du for z in [0, w].
            const double p0 = tp_[i];
            double z;
            if (std::abs(s) * w < 1e-12 * std::max(p0, 1e-300)) {
                z = du / std::max(p0, 1e-300);
            } else {
                const double disc = p0 * p0 + 2 * s * du;
                z = (disc <= 0) ? w : (2 * du) / (p0 + std::sqrt(disc));
            }
            return tx_[i] + std::clamp(z, 0.0, w);
        }
    }
    return 0;
}

double DistributionSpec::laplace(double theta) const {
    if (theta < 0) throw InvalidParametersError("laplace needs theta >= 0");
    if (theta == 0) return 1.0;
    switch (family_) {
        case Family::exponential: {
            const double r = params_[0];
            return r / (r + theta);
        }
        case Family::uniform:
        case Family::deterministic_plus_jitter: {
            const double w = hi_ - lo_;
            const double z = theta * w;
            // e^{-theta lo} (1 - e^{-z}) / z, stable for small z.
            return std::exp(-theta * lo_) * (-std::expm1(-z)) / z;
        }
        case Family::shifted_exponential: {
            const double s0 = params_[0], r = params_[1];
            return std::exp(-theta * s0) * r / (r + theta);
        }
        case Family::user_table: {
            double acc = 0;
            for (size_t i = 0; i + 1 < tx_.size(); ++i)
                acc += exp_linear_integral(tx_[i], tx_[i + 1], tp_[i], tp_[i + 1], -theta);
            return acc;
        }
    }
    return 0;
}

double DistributionSpec::laplace_below(double theta, double b) const {
    if (b <= lo_) return 0.0;
    switch (family_) {
        case Family::exponential: {
            const double r = params_[0];
            return r / (r + theta) * (-std::expm1(-(r + theta) * b));
        }
        case Family::uniform:
        case Family::deterministic_plus_jitter: {
            const double hi = std::min(b, hi_);
            const double w = hi_ - lo_;
            if (theta == 0) return (hi - lo_) / w;
            return (std::exp(-theta * lo_) - std::exp(-theta * hi)) / (theta * w);
        }
        case Family::shifted_exponential: {
            const double s0 = params_[0], r = params_[1];
            return std::exp(-theta * s0) * r / (r + theta) * (-std::expm1(-(r + theta) * (b - s0)));
        }
        case Family::user_table: {
            double acc = 0;
            for (size_t i = 0; i + 1 < tx_.size() && tx_[i] < b; ++i) {
                const double x1 = std::min(b, tx_[i + 1]);
                const double t = (x1 - tx_[i]) / (tx_[i + 1] - tx_[i]);
                const double p1 = tp_[i] + t * (tp_[i + 1] - tp_[i]);
                acc += exp_linear_integral(tx_[i], x1, tp_[i], p1, -theta);
            }
            return acc;
        }
    }
    return 0;
}

bool DistributionSpec::log_mgf(double eta, double& out) const {
    if (eta == 0) {
        out = 0;
        return true;
    }
    if (eta < 0) {
        out = std::log(laplace(-eta));
        return true;
    }
    switch (family_) {
        case Family::exponential: {
            const double r = params_[0];
            if (eta >= r) return false;
            out = std::log(r) - std::log(r - eta);
            return true;
        }
        case Family::uniform:
        case Family::deterministic_plus_jitter: {
            out = eta * lo_ + log_expm1_over(eta * (hi_ - lo_));
            return true;
        }
        case Family::shifted_exponential: {
            const double s0 = params_[0], r = params_[1];
            if (eta >= r) return false;
            out = eta * s0 + std::log(r) - std::log(r - eta);
            return true;
        }
        case Family::user_table: {
            const double shift = eta * hi_;
            double acc = 0;
            for (size_t i = 0; i + 1 < tx_.size(); ++i)
                acc += exp_linear_integral(tx_[i], tx_[i + 1], tp_[i], tp_[i + 1], eta, shift);
            out = shift + std::log(acc);
            return true;
        }
    }
    return false;
}

double DistributionSpec::integrated_tail(double x) const {
    if (x <= 0) return 0;
    switch (family_) {
        case Family::exponential:
            return -std::expm1(-params_[0] * x) / params_[0];
        case Family::uniform:
        case Family::deterministic_plus_jitter: {
            if (x <= lo_) return x;
            const double w = hi_ - lo_;
            if (x >= hi_) return mean_;
            const double z = x - lo_;
            return lo_ + z - z * z / (2 * w);
        }
        case Family::shifted_exponential: {
            const double s0 = params_[0], r = params_[1];
            if (x <= s0) return x;
            return s0 - std::expm1(-r * (x - s0)) / r;
        }
        case Family::user_table: {
            if (x <= lo_) return x;
            if (x >= hi_) return mean_;
            // H(x) = x - int_0^x cdf = x - [x cdf(x) - int_0^x t g(t) dt] by parts.
            const auto it = std::upper_bound(tx_.begin(), tx_.end(), x);
            const size_t i = static_cast<size_t>(it - tx_.begin()) - 1;
            const double w = tx_[i + 1] - tx_[i];
            const double s = (tp_[i + 1] - tp_[i]) / w;
            const double a = tp_[i] - s * tx_[i];
            auto prim1 = [&](double t) { return a * t * t / 2 + s * t * t * t / 3; };
            const double xint = txint_[i] + prim1(x) - prim1(tx_[i]);
            return x - (x * cdf(x) - xint);
        }
    }
    return 0;
}

double DistributionSpec::sample(RngStream& rng) const { return quantile(rng.uniform()); }

double DistributionSpec::sample_tilted_down(double theta, RngStream& rng) const {
    if (!(theta > 0)) return sample(rng);
    switch (family_) {
        case Family::exponential:
            return rng.exponential(params_[0] + theta);
        case Family::uniform:
        case Family::deterministic_plus_jitter: {
            const double w = hi_ - lo_;
            const double q = -std::expm1(-theta * w);
            return lo_ - std::log1p(-rng.uniform() * q) / theta;
        }
        case Family::shifted_exponential:
            return params_[0] + rng.exponential(params_[1] + theta);
        case Family::user_table:
            break;
    }
    // Table: segment masses under e^{-theta x}, then bisection inside a segment.
    const size_t n = tx_.size();
    std::vector<double> mass(n - 1);
    double total = 0;
    for (size_t i = 0; i + 1 < n; ++i)
        total += mass[i] = exp_linear_integral(tx_[i], tx_[i + 1], tp_[i], tp_[i + 1], -theta);
    double u = rng.uniform() * total;
    size_t i = 0;
    while (i + 1 < mass.size() && u > mass[i]) u -= mass[i++];
    double a = tx_[i], b = tx_[i + 1];
    for (int it = 0; it < 100 && (b - a) > 1e-13 * (1 + b); ++it) {
        const double midp = 0.5 * (a + b);
        const double t = (midp - tx_[i]) / (tx_[i + 1] - tx_[i]);
        const double pm = tp_[i] + t * (tp_[i + 1] - tp_[i]);
        if (exp_linear_integral(tx_[i], midp, tp_[i], pm, -theta) < u)
            a = midp;
        else
            b = midp;
    }
    return 0.5 * (a + b);
}

double DistributionSpec::sample_tilted_up(double eta, RngStream& rng) const {
    if (!(eta > 0)) return sample(rng);
    switch (family_) {
        case Family::exponential: {
            const double r = params_[0];
            if (eta >= r) throw MgfUnavailableError("tilt parameter at or past the mgf singularity");
            return rng.exponential(r - eta);
        }
        case Family::uniform:
        case Family::deterministic_plus_jitter: {
            const double w = hi_ - lo_;
            const double z = eta * w;
            if (z > 700) {
                // Mass concentrates at the upper endpoint.
                const double zz = std::max(0.0, w + std::log(rng.uniform()) / eta);
                return lo_ + zz;
            }
            return lo_ + std::log1p(rng.uniform() * std::expm1(z)) / eta;
        }
        case Family::shifted_exponential: {
            const double r = params_[1];
            if (eta >= r) throw MgfUnavailableError("tilt parameter at or past the mgf singularity");
            return params_[0] + rng.exponential(r - eta);
        }
        case Family::user_table:
            break;
    }
    const size_t n = tx_.size();
    const double shift = eta * hi_;
    std::vector<double> mass(n - 1);
    double total = 0;
    for (size_t i = 0; i + 1 < n; ++i)
        total += mass[i] = exp_linear_integral(tx_[i], tx_[i + 1], tp_[i], tp_[i + 1], eta, shift);
    double u = rng.uniform() * total;
    size_t i = 0;
    while (i + 1 < mass.size() && u > mass[i]) u -= mass[i++];
    double a = tx_[i], b = tx_[i + 1];
    for (int it = 0; it < 100 && (b - a) > 1e-13 * (1 + b); ++it) {
        const double midp = 0.5 * (a + b);
        const double t = (midp - tx_[i]) / (tx_[i + 1] - tx_[i]);
        const double pm = tp_[i] + t * (tp_[i + 1] - tp_[i]);
        if (exp_linear_integral(tx_[i], midp, tp_[i], pm, eta, shift) < u)
            a = midp;
        else
            b = midp;
    }
    return 0.5 * (a + b);
}

double DistributionSpec::sample_equilibrium(RngStream& rng) const {
    if (family_ == Family::exponential) return rng.exponential(params_[0]);  // memoryless fixed point
    const double target = rng.uniform() * mean_;
    double a = 0, b = std::isfinite(hi_) ? hi_ : std::max(1.0, mean_);
    while (integrated_tail(b) < target) b *= 2;  // unbounded support: expand bracket
    for (int it = 0; it < 200 && (b - a) > 1e-12 * std::max(1.0, b); ++it) {
        const double midp = 0.5 * (a + b);
        if (integrated_tail(midp) < target)
            a = midp;
        else
            b = midp;
    }
    return 0.5 * (a + b);
}

DistributionSpec DistributionSpec::from_json(const nlohmann::json& j) {
    const std::string fam = j.at("family").get<std::string>();
    auto p = [&](size_t i) { return j.at("params").at(i).get<double>(); };
    if (fam == "exponential" || fam == "exp") return exponential(p(0));
    if (fam == "uniform") return uniform(p(0), p(1));
    if (fam == "shifted-exponential" || fam == "shifted_exponential") return shifted_exponential(p(0), p(1));
    if (fam == "deterministic-plus-jitter" || fam == "deterministic_plus_jitter")
        return deterministic_plus_jitter(p(0), p(1));
    if (fam == "table" || fam == "user-table" || fam == "user_table") {
        const auto& t = j.at("table");
        return user_table(t.at("x").get<std::vector<double>>(), t.at("pdf").get<std::vector<double>>());
    }
    throw InvalidParametersError("unknown distribution family '" + fam + "'");
}

nlohmann::json DistributionSpec::to_json() const {
    nlohmann::json j;
    j["family"] = family_name(family_);
    if (family_ == Family::user_table) {
        j["table"] = {{"x", tx_}, {"pdf", tp_}};
    } else {
        j["params"] = params_;
    }
    return j;
}

std::string DistributionSpec::describe() const {
    std::ostringstream os;
    os << family_name(family_) << "(";
    if (family_ == Family::user_table) {
        os << tx_.size() << " knots on [" << lo_ << "," << hi_ << "]";
    } else {
        for (size_t i = 0; i < params_.size(); ++i) os << (i ? ", " : "") << params_[i];
    }
    os << ")";
    return os.str();
}

}  // namespace exactq
