#include "exactq/queueing.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>

#include "exactq/errors.hpp"

namespace exactq {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

WorkVec kw_step(WorkVec w, double s, double t) {
    w[0] += s;  // sorted input: front is the least-loaded server
    for (double& x : w) x = std::max(0.0, x - t);
    std::sort(w.begin(), w.end());
    return w;
}

WorkVec ra_step(WorkVec v, double s, int u, double t) {
    v[u] += s;
    for (double& x : v) x = std::max(0.0, x - t);
    return v;
}

namespace {

// Scenario-backed arrival tape: slot k < depth replays backward arrival
// -(depth-k); slot k >= depth reads or extends the forward arrays.
struct ArrivalTape {
    const ModelSpec& model;
    BackwardScenario& sc;
    int64_t depth;
    RngStream* fwd;

    void ensure(int64_t slot) {
        if (slot < depth) {
            EXACTQ_CHECK(sc.service_revealed(depth - slot), "backward service missing in scenario");
            return;
        }
        const size_t k = static_cast<size_t>(slot - depth);
        while (sc.t_fwd.size() <= k) {
            EXACTQ_CHECK(fwd != nullptr, "forward extension requested without a stream");
            sc.t_fwd.push_back(model.arrival.sample(*fwd));
            sc.s_fwd.push_back(model.service.sample(*fwd));
            sc.u_fwd.push_back(fwd->uniform_int(model.c));
        }
    }
    double gap_after(int64_t slot) {
        ensure(slot);
        return slot < depth ? sc.t_back[depth - slot - 1] : sc.t_fwd[slot - depth];
    }
    double service(int64_t slot) {
        ensure(slot);
        return slot < depth ? sc.service_at(depth - slot) : sc.s_fwd[slot - depth];
    }
    int node(int64_t slot) {
        ensure(slot);
        return slot < depth ? sc.u_back[depth - slot - 1] : sc.u_fwd[slot - depth];
    }
};

}  // namespace

InitiationLog ra_initiations(const ModelSpec& model, BackwardScenario& sc, int64_t depth,
                             int64_t min_initiations, RngStream& fwd, const RaInitState* init) {
    const int c = model.c;
    InitiationLog log;
    log.depth = depth;

    double total = 0;  // local time of the sampling instant
    for (int64_t j = 1; j <= depth; ++j) total += sc.t_back[j - 1];

    ArrivalTape tape{model, sc, depth, &fwd};
    std::vector<double> completion(c, kInf);
    std::vector<std::deque<std::pair<double, int64_t>>> line(c);  // (service, slot)
    if (init) {
        for (int i = 0; i < c; ++i)
            if (init->busy_remaining[i] > 0) completion[i] = init->busy_remaining[i];
    }

    int64_t slot = 0;
    double next_arrival = 0;
    auto initiate = [&](int node, double at, double svc, int64_t who) {
        log.services.push_back(svc);
        log.times.push_back(at - total);
        log.slot.push_back(who);
        log.node.push_back(node);
        completion[node] = at + svc;
    };

    while (static_cast<int64_t>(log.services.size()) < min_initiations) {
        int cnode = -1;
        double ct = kInf;
        for (int i = 0; i < c; ++i)
            if (completion[i] < ct) {
                ct = completion[i];
                cnode = i;
            }
        // Departures strictly before arrivals at equal timestamps.
        if (cnode >= 0 && ct <= next_arrival) {
            completion[cnode] = kInf;
            if (!line[cnode].empty()) {
                auto [svc, who] = line[cnode].front();
                line[cnode].pop_front();
                initiate(cnode, ct, svc, who);
            }
        } else {
            const int u = tape.node(slot);
            const double svc = tape.service(slot);
            if (completion[u] == kInf)
                initiate(u, next_arrival, svc, slot);
            else
                line[u].emplace_back(svc, slot);
            next_arrival += tape.gap_after(slot);
            ++slot;
        }
    }
    return log;
}

DetailedState fifo_state_at_zero(const ModelSpec& model, const BackwardScenario& sc, int64_t depth,
                                 const InitiationLog& log, const RaInitState* init) {
    const int c = model.c;
    double total = 0;
    for (int64_t j = 1; j <= depth; ++j) total += sc.t_back[j - 1];

    std::priority_queue<double, std::vector<double>, std::greater<>> busy;
    if (init) {
        for (double r : init->busy_remaining)
            if (r > 0) busy.push(r);
    }
    int64_t waiting = 0, in_system = busy.size();
    size_t next_service = 0;
    auto initiate = [&](double at) {
        EXACTQ_CHECK(next_service < log.services.size(), "initiation log exhausted");
        busy.push(at + log.services[next_service++]);
    };

    int64_t slot = 0;
    double next_arrival = 0;
    while (true) {
        const double ct = busy.empty() ? kInf : busy.top();
        const double at = slot < depth ? next_arrival : kInf;
        const double tmin = std::min(ct, at);
        if (tmin >= total || tmin == kInf) break;  // events at the instant itself stay pending
        if (ct <= at) {
            busy.pop();
            --in_system;
            if (waiting > 0) {
                --waiting;
                initiate(ct);
            }
        } else {
            ++in_system;
            if (static_cast<int>(busy.size()) < c)
                initiate(at);
            else
                ++waiting;
            next_arrival += sc.t_back[depth - slot - 1];
            ++slot;
        }
    }

    DetailedState out;
    out.q0 = in_system;
    out.l0 = static_cast<int>(busy.size());
    EXACTQ_CHECK(out.l0 == std::min<int64_t>(out.q0, c), "FIFO state is not work-conserving");
    while (!busy.empty()) {
        out.residuals.push_back(busy.top() - total);
        busy.pop();
    }
    for (double r : out.residuals) EXACTQ_CHECK(r > 0, "nonpositive residual service");
    return out;
}

KwSampleResult sample_stationary_kw(const ModelSpec& model, const TiltContext& tilt,
                                    const SamplerOptions& opts) {
    if (!model.emptiable)
        throw NotApplicableError(
            "P(T > S) = 0: the RA model never empties; use the sandwich or Harris sampler");

    BackwardEngine engine(model, tilt, opts.seed, opts.replication, opts.limits);
    if (opts.trace) engine.set_trace(opts.trace);
    const CoalescenceResult det =
        opts.record_detection ? engine.coalescence(0) : engine.first_emptiness(0);

    KwSampleResult res;
    res.n_depth = det.n;
    res.backward_arrivals = det.n;
    res.machinery_horizon = det.horizon;
    res.steps = det.steps;
    res.w0.assign(model.c, 0.0);
    if (det.n == 0) return res;

    RngStream fwd(opts.seed, opts.replication, stream_role::forward);
    const InitiationLog log =
        ra_initiations(model, engine.scenario_mut(), det.n, det.n, fwd);

    // Reset view: services in initiation order against the stored
    // interarrival gaps, N plain K-W steps from the empty vector.
    for (int64_t k = 0; k < det.n; ++k)
        res.w0 = kw_step(std::move(res.w0), log.services[k], engine.scenario().t_back[det.n - k - 1]);

    res.state0 = fifo_state_at_zero(model, engine.scenario(), det.n, log);
    return res;
}

KwSampleResult sample_stationary_kw(const ModelSpec& model, const SamplerOptions& opts) {
    TiltOptions topt;
    topt.drift_a = opts.drift_a;
    if (opts.truncation_b) topt.truncation_b = *opts.truncation_b;
    return sample_stationary_kw(model, solve_tilt(model, topt), opts);
}

TruncationRule truncation_wrap(const ModelSpec& model, std::optional<double> b) {
    if (!model.emptiable)
        throw NoValidTruncationError("P(T > S) = 0: no truncation point can make the RA model empty");
    const double es = model.service.mean();
    const double s_lo = model.service.support_lo();
    const double t_hi = model.arrival.support_hi();
    const int c = model.c;

    TruncationRule rule;
    if (b) {
        rule.b = *b;
        if (!(c * model.arrival.integrated_tail(rule.b) > es))
            throw NoValidTruncationError("c E min(T,b) <= E(S) at the requested b");
        if (!(rule.b > s_lo))
            throw NoValidTruncationError("min(T,b) can never exceed S at the requested b");
    } else {
        const double target = 1.05 * es / c;
        if (!(model.arrival.mean() > target))
            throw NoValidTruncationError("stability margin below 5%: no truncation point qualifies");
        double lo = 0, hi = 1;
        while (model.arrival.integrated_tail(hi) <= target) hi *= 2;
        for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            (model.arrival.integrated_tail(mid) <= target ? lo : hi) = mid;
        }
        rule.b = std::max(hi, s_lo * 1.05 + 1e-12);
    }
    rule.identity = rule.b >= t_hi;
    rule.truncated_arrival_mean = model.arrival.integrated_tail(rule.b);
    return rule;
}

}  // namespace exactq
