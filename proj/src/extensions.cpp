#include "exactq/extensions.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <queue>

#include "exactq/errors.hpp"

namespace exactq {

WorkVec continuous_time_kw(WorkVec w0, const ModelSpec& model, RngStream& rng) {
    const double s = model.service.sample(rng);
    const double te = model.arrival.sample_equilibrium(rng);
    return kw_step(std::move(w0), s, te);
}

double stationary_workload_g1(const ModelSpec& model, const TiltContext& tilt, G1Method method,
                              const SamplerOptions& opts) {
    EXACTQ_CHECK(model.c == 1, "GI/GI/1 workload needs c = 1");
    RngStream rng(opts.seed, opts.replication, stream_role::extension);
    if (method == G1Method::mixture) {
        if (!rng.bernoulli(model.rho)) return 0.0;
        const double d = sample_stationary_kw(model, tilt, opts).w0[0];
        return d + model.service.sample_equilibrium(rng);
    }
    const double d = sample_stationary_kw(model, tilt, opts).w0[0];
    const double s = model.service.sample(rng);
    const double te = model.arrival.sample_equilibrium(rng);
    return std::max(0.0, d + s - te);
}

double delay_under_discipline(const DetailedState& state, Discipline d, const ModelSpec& model,
                              RngStream& rng) {
    const int c = model.c;
    if (state.q0 < c) return 0.0;

    // All servers busy. Line in arrival order, oldest first; the tagged
    // customer is the most recent arrival at time 0.
    std::priority_queue<double, std::vector<double>, std::greater<>> busy;
    for (double r : state.residuals) busy.push(r);
    std::deque<int64_t> line;
    for (int64_t k = 0; k < state.q0 - c; ++k) line.push_back(k);
    const int64_t tagged = state.q0 - c;
    line.push_back(tagged);
    int64_t next_id = tagged + 1;

    double next_arrival = model.arrival.sample(rng);
    while (true) {
        const double ct = busy.top();
        if (ct <= next_arrival) {
            busy.pop();
            EXACTQ_CHECK(!line.empty(), "line emptied before the tagged customer was served");
            int64_t who;
            switch (d) {
                case Discipline::fifo:
                    who = line.front();
                    line.pop_front();
                    break;
                case Discipline::lifo:
                    who = line.back();
                    line.pop_back();
                    break;
                default: {
                    const int k = rng.uniform_int(static_cast<int>(line.size()));
                    who = line[k];
                    line.erase(line.begin() + k);
                }
            }
            if (who == tagged) return ct;
            busy.push(ct + model.service.sample(rng));
        } else {
            line.push_back(next_id++);
            next_arrival += model.arrival.sample(rng);
        }
    }
}

double ForkJoinModel::component_mean(int i) const {
    return (common_base ? common_base->mean() : 0.0) + components[i].mean();
}

double ForkJoinModel::sample_component(int i, RngStream& rng) const {
    return components[i].sample(rng);
}

ForkJoinModel build_forkjoin(DistributionSpec arrival, std::vector<DistributionSpec> components,
                             std::optional<DistributionSpec> common_base) {
    ForkJoinModel fj{std::move(arrival), std::move(components), std::move(common_base),
                     static_cast<int>(0)};
    fj.c = static_cast<int>(fj.components.size());
    if (fj.c < 1) throw InvalidParametersError("fork-join needs at least one component");
    const double lambda = 1.0 / fj.arrival.mean();
    for (int i = 0; i < fj.c; ++i) {
        if (!(lambda * fj.component_mean(i) < 1))
            throw UnstableError("fork-join component " + std::to_string(i + 1) +
                                " has lambda E(S(i)) >= 1");
    }
    return fj;
}

namespace {

struct FjTilt {
    std::vector<double> theta;  // per-coordinate roots
    double m = 0;
};

double fj_log_mgf(const ForkJoinModel& fj, int i, double theta, bool& ok) {
    double acc = 0, part;
    if (fj.common_base) {
        if (!fj.common_base->log_mgf(theta, part)) {
            ok = false;
            return 0;
        }
        acc += part;
    }
    if (!fj.components[i].log_mgf(theta, part)) {
        ok = false;
        return 0;
    }
    ok = true;
    return acc + part;
}

FjTilt solve_fj_tilt(const ForkJoinModel& fj) {
    FjTilt t;
    for (int i = 0; i < fj.c; ++i) {
        // Root of log E e^{theta (S(i) - T)}; bracket by doubling, stop at the
        // mgf domain edge.
        auto value = [&](double th, double& out) {
            bool ok;
            const double lm = fj_log_mgf(fj, i, th, ok);
            if (!ok) return false;
            out = lm + std::log(fj.arrival.laplace(th));
            return std::isfinite(out);
        };
        double lo = 1e-9, hi = 1.0, f;
        if (!value(lo, f) || f >= 0) throw NoRootError("fork-join tilt: no descent near zero");
        bool bracketed = false;
        for (int it = 0; it < 400 && !bracketed; ++it) {
            if (value(hi, f)) {
                if (f > 0) {
                    bracketed = true;
                } else {
                    lo = hi;
                    hi *= 2;
                }
            } else {
                // Past the mgf domain edge, where the transform blows up:
                // shrink back toward it until the value is finite.
                hi = 0.5 * (lo + hi);
            }
        }
        if (!bracketed)
            throw MgfUnavailableError("fork-join tilt root not bracketed for component " +
                                      std::to_string(i + 1));
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (value(mid, f) && f <= 0 ? lo : hi) = mid;
        }
        t.theta.push_back(0.5 * (lo + hi));
    }
    const double tmin = *std::min_element(t.theta.begin(), t.theta.end());
    t.m = std::log(static_cast<double>(fj.c)) / tmin + 1.0;
    return t;
}

}  // namespace

std::vector<double> forkjoin_v0(const ForkJoinModel& fj, const SamplerOptions& opts) {
    const int c = fj.c;
    const FjTilt tilt = solve_fj_tilt(fj);
    RngStream nominal(opts.seed, opts.replication, stream_role::arrival);
    RngStream tilted(opts.seed, opts.replication, stream_role::tilt);
    int64_t steps = 0;
    auto bump = [&] {
        if (++steps > opts.limits.max_steps) throw BudgetExceededError("fork-join walk budget");
    };

    std::vector<double> pos(c, 0), level(c, 0), m0(c, 0), svec(c), rel(c);
    std::vector<std::vector<double>> path;  // for the running max only
    const double m = tilt.m;
    const double tmin = *std::min_element(tilt.theta.begin(), tilt.theta.end());

    while (true) {
        // Nominal descent to the next milestone.
        while (true) {
            bump();
            const double t = fj.arrival.sample(nominal);
            const double b = fj.common_base ? fj.common_base->sample(nominal) : 0.0;
            bool below = true;
            for (int i = 0; i < c; ++i) {
                const double s = b + fj.sample_component(i, nominal);
                pos[i] += s - t;
                m0[i] = std::max(m0[i], pos[i]);
                below = below && pos[i] < level[i] - m;
            }
            if (below) break;
        }
        level = pos;

        // Tilted up-crossing proposal in a uniformly chosen direction.
        const int dir = tilted.uniform_int(c);
        std::fill(rel.begin(), rel.end(), 0.0);
        bool crossed = false;
        while (!crossed) {
            bump();
            const double t = fj.arrival.sample_tilted_down(tilt.theta[dir], tilted);
            const double b =
                fj.common_base ? fj.common_base->sample_tilted_up(tilt.theta[dir], tilted) : 0.0;
            for (int i = 0; i < c; ++i) {
                const double z = i == dir ? fj.components[i].sample_tilted_up(tilt.theta[dir], tilted)
                                          : fj.sample_component(i, tilted);
                rel[i] += (b + z) - t;
                crossed = crossed || rel[i] > m;
            }
        }
        double denom = 0;
        for (int i = 0; i < c; ++i) denom += std::exp(tilt.theta[i] * rel[i]) / c;
        const double accept_p = 1.0 / denom;
        EXACTQ_CHECK(accept_p <= c * std::exp(-tmin * m) && accept_p < 1.0,
                     "fork-join acceptance ratio bound violated");
        if (tilted.bernoulli(accept_p)) {
            for (int i = 0; i < c; ++i) {
                pos[i] = level[i] + rel[i];
                m0[i] = std::max(m0[i], pos[i]);
            }
        } else {
            return m0;
        }
    }
}

ForkJoinSample forkjoin_sojourn(const ForkJoinModel& fj, const SamplerOptions& opts) {
    ForkJoinSample out;
    out.v0 = forkjoin_v0(fj, opts);
    RngStream rng(opts.seed, opts.replication, stream_role::extension);
    const double b = fj.common_base ? fj.common_base->sample(rng) : 0.0;
    out.service.resize(fj.c);
    out.sojourn = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < fj.c; ++i) {
        out.service[i] = b + fj.sample_component(i, rng);
        out.sojourn = std::max(out.sojourn, out.v0[i] + out.service[i]);
    }
    return out;
}

double harris_default_epsilon(const ModelSpec& model) {
    // Any epsilon below the interarrival support's upper end keeps the
    // regeneration argument intact (the gap T > eps drains the residual);
    // half the support balances the two sides of the event.
    const double t_hi = model.arrival.support_hi();
    EXACTQ_CHECK(std::isfinite(t_hi), "Harris models have bounded interarrival support");
    return 0.5 * t_hi;
}

TiltContext solve_tilt_harris(const ModelSpec& model) {
    TiltOptions o;
    o.require_joint_records = false;
    return solve_tilt(model, o);
}

namespace {

// Number in system at node `node` just before each arrival epoch j in
// [2, upto], reconstructed from the node's certified emptiness at -from.
std::vector<int> node_counts_before(const BackwardScenario& sc, int node, int64_t from,
                                    int64_t upto) {
    // Single-server FIFO node from its certified emptiness at -from; local
    // clock 0 there. Departure of the k-th routed arrival is
    // max(its arrival, previous departure) + its service.
    std::vector<double> dep;
    double now = 0;
    std::vector<int> counts(upto + 1, 0);
    for (int64_t j = from; j >= 1; --j) {
        if (j <= upto) {
            int cnt = 0;
            for (int64_t k = static_cast<int64_t>(dep.size()) - 1; k >= 0 && dep[k] > now; --k)
                ++cnt;
            counts[j] = cnt;
        }
        if (sc.u_back[j - 1] == node) {
            const double start = std::max(now, dep.empty() ? 0.0 : dep.back());
            dep.push_back(start + sc.service_at(j));
        }
        now += sc.t_back[j - 1];
    }
    return counts;
}

}  // namespace

HarrisSampleResult harris_sample_c2(const ModelSpec& model, const TiltContext& tilt,
                                    const HarrisConfig& cfg, const SamplerOptions& opts) {
    if (model.c != 2) throw NotApplicableError("Harris regeneration sampler covers c = 2 only");
    if (model.emptiable)
        throw NotApplicableError("model empties: use the empty-RA or sandwich sampler");
    if (!(model.rho > 1 && model.rho < 2))
        throw NotApplicableError("Harris sampler needs 1 < rho < 2");
    const double eps = cfg.epsilon > 0 ? cfg.epsilon : harris_default_epsilon(model);
    if (!(model.arrival.sf(eps) > 0))
        throw InvalidParametersError("P(T > epsilon) = 0: epsilon exceeds the interarrival support");

    BackwardEngine engine(model, tilt, opts.seed, opts.replication, opts.limits);
    if (opts.trace) engine.set_trace(opts.trace);

    int64_t target = 16;
    int64_t found = -1;
    while (found < 0) {
        const int64_t m0 = engine.certified_empty_epoch(0, target);
        const int64_t m1 = engine.certified_empty_epoch(1, target);
        const int64_t limit = std::min(m0, m1);
        const auto v_node0 = engine.coord_workloads(0, limit, m0);
        const auto v_node1 = engine.coord_workloads(1, limit, m1);
        const auto counts1 = node_counts_before(engine.scenario(), 1, m1, limit);
        for (int64_t j = 2; j <= limit; ++j) {
            if (engine.scenario().u_back[j - 1] != 0) continue;
            if (!(engine.scenario().t_back[j - 1] > eps)) continue;
            if (v_node0[j] != 0.0) continue;
            if (!(v_node1[j] <= eps)) continue;
            if (counts1[j] != 1) continue;
            // Node 1 empty, node 2 one in-service customer with remaining
            // <= eps, the arrival routed to node 1 with a gap > eps behind it.
            found = j;
            break;
        }
        if (found < 0) target = std::max(limit + 1, 2 * target);
    }

    const int64_t n = found - 1;
    const double svc = engine.scenario().service_at(found);
    const double gap = engine.scenario().t_back[found - 1];
    const double remaining = svc - gap;
    EXACTQ_CHECK(remaining > 0, "P(T > S) = 0 model produced S <= T at the regeneration");

    RaInitState init;
    init.busy_remaining = {remaining, 0.0};

    HarrisSampleResult res;
    res.n_depth = n;
    res.backward_arrivals = n;
    res.machinery_horizon = engine.ledger().horizon();
    res.steps = engine.steps_used();
    res.regen_remaining = remaining;

    RngStream fwd(opts.seed, opts.replication, stream_role::forward);
    const InitiationLog log = ra_initiations(model, engine.scenario_mut(), n, n, fwd, &init);

    WorkVec w = {0.0, remaining};
    for (int64_t k = 0; k < n; ++k)
        w = kw_step(std::move(w), log.services[k], engine.scenario().t_back[n - k - 1]);
    res.w0 = std::move(w);
    res.state0 = fifo_state_at_zero(model, engine.scenario(), n, log, &init);
    return res;
}

}  // namespace exactq
