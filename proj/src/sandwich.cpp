#include "exactq/sandwich.hpp"

#include <algorithm>
#include <cmath>

#include "exactq/errors.hpp"

namespace exactq {

BoundPair bound_step(BoundPair pair, double s, double t) {
    pair.upper = kw_step(std::move(pair.upper), s, t);
    pair.lower = kw_step(std::move(pair.lower), s, t);
    for (size_t i = 0; i < pair.upper.size(); ++i)
        EXACTQ_CHECK(pair.lower[i] <= pair.upper[i], "bound ordering violated");
    return pair;
}

namespace {

WorkVec drained(WorkVec v, double dt) {
    for (double& x : v) x = std::max(0.0, x - dt);
    return v;
}

WorkVec arrival_applied(WorkVec v, double s) {
    v[0] += s;
    std::sort(v.begin(), v.end());
    return v;
}

}  // namespace

WorkVec stationary_state_at(const ModelSpec& model, const BackwardScenario& sc,
                            const InitiationLog& log, int64_t n1, int64_t kappa) {
    WorkVec w(model.c, 0.0);
    for (int64_t j = n1; j > kappa; --j)
        w = kw_step(std::move(w), log.services[n1 - j], sc.t_back[j - 1]);
    return w;
}

WindowRun sandwich_window(const ModelSpec& model, const BackwardScenario& sc,
                          const InitiationLog& log, int64_t n1, int64_t kappa,
                          const WorkVec& upper_start) {
    const int c = model.c;
    WindowRun run;
    run.upper_pre.reserve(kappa + 1);
    run.lower_pre.reserve(kappa + 1);

    // Local clock: arrival -kappa at 0, the sampling instant at `total`.
    std::vector<double> epoch(kappa + 1, 0.0);  // epoch[j] = local time of arrival -j
    for (int64_t j = kappa; j >= 1; --j)
        epoch[j - 1] = epoch[j] + sc.t_back[j - 1];  // epoch[0] = total
    const double total = epoch[0];

    WorkVec upper = upper_start;
    std::sort(upper.begin(), upper.end());
    WorkVec lower(c, 0.0);

    auto record_pre = [&](const WorkVec& u, const WorkVec& l) {
        for (int i = 0; i < c; ++i) EXACTQ_CHECK(l[i] <= u[i], "bound ordering violated");
        run.upper_pre.push_back(u);
        run.lower_pre.push_back(l);
    };

    // Once pinned, `post` holds the post-arrival state of the true process at
    // the last applied epoch; drains always span whole gaps so the evolution
    // is bit-identical to the plain Kiefer-Wolfowitz chain.
    WorkVec post;
    int64_t post_epoch = 0;
    std::vector<std::pair<double, double>> customers;  // (service start, departure) rel. to 0

    auto pin = [&](const WorkVec& at_vec, double at_time) {
        run.coalesced = true;
        run.tau = at_time - total;
        bool has_idle = false;
        for (double x : at_vec) has_idle = has_idle || x == 0.0;
        EXACTQ_CHECK(has_idle, "bounds met with every server busy");
        run.q_tau = std::count_if(at_vec.begin(), at_vec.end(), [](double x) { return x > 0; });
        // Queue empty at coalescence: each busy coordinate is one in-service
        // customer whose remaining time is the coordinate itself.
        for (double x : at_vec)
            if (x > 0) customers.emplace_back(run.tau, at_time + x - total);
    };

    int64_t j = kappa;
    for (; j >= 1 && !run.coalesced; --j) {
        record_pre(upper, lower);
        const double s = log.services[n1 - j];
        const double gap = sc.t_back[j - 1];
        if (upper == lower) {
            pin(upper, epoch[j]);
            // The pinned epoch's own arrival still has to be applied.
            customers.emplace_back(epoch[j] + upper[0] - total, epoch[j] + upper[0] + s - total);
            post = arrival_applied(std::move(upper), s);
            post_epoch = j;
            break;
        }
        WorkVec up = arrival_applied(std::move(upper), s);
        WorkVec lp = arrival_applied(std::move(lower), s);
        double dstar = 0;
        for (int i = 0; i < c; ++i)
            if (up[i] != lp[i]) dstar = std::max(dstar, up[i]);
        if (dstar <= gap) {
            pin(drained(up, dstar), epoch[j] + dstar);
            post = std::move(up);  // canonical: whole-gap drains from here on
            post_epoch = j;
            break;
        }
        upper = drained(std::move(up), gap);
        lower = drained(std::move(lp), gap);
    }

    if (!run.coalesced) {
        record_pre(upper, lower);  // state at 0-
        return run;
    }

    // Pinned continuation: the true process, one whole-gap step per epoch.
    for (int64_t j2 = post_epoch - 1; j2 >= 1; --j2) {
        WorkVec pre = drained(std::move(post), sc.t_back[j2]);
        record_pre(pre, pre);
        const double s = log.services[n1 - j2];
        customers.emplace_back(epoch[j2] + pre[0] - total, epoch[j2] + pre[0] + s - total);
        post = arrival_applied(std::move(pre), s);
    }
    run.v0 = drained(std::move(post), sc.t_back[0]);
    run.upper_pre.push_back(run.v0);
    run.lower_pre.push_back(run.v0);

    DetailedState st;
    for (const auto& [start_t, dep] : customers) {
        if (dep < 0) continue;
        ++st.q0;
        if (start_t < 0) st.residuals.push_back(dep);
    }
    std::sort(st.residuals.begin(), st.residuals.end());
    st.l0 = static_cast<int>(st.residuals.size());
    EXACTQ_CHECK(st.l0 == std::min<int64_t>(st.q0, c), "pinned FIFO state is not work-conserving");
    run.q0 = st.q0;
    run.state0 = st;
    return run;
}

SandwichResult sample_stationary_sandwich(const ModelSpec& model, const TiltContext& tilt,
                                          int64_t kappa0, const SamplerOptions& opts,
                                          int64_t kappa_cap) {
    EXACTQ_CHECK(kappa0 >= 1, "kappa0 must be >= 1");
    BackwardEngine engine(model, tilt, opts.seed, opts.replication, opts.limits);
    if (opts.trace) engine.set_trace(opts.trace);
    RngStream fwd(opts.seed, opts.replication, stream_role::forward);

    InitiationLog log;
    int64_t log_n1 = -1;

    for (int64_t kappa = kappa0;; kappa *= 2) {
        if (kappa > kappa_cap)
            throw BudgetExceededError("sandwich back-off exceeded the kappa cap");
        const CoalescenceResult det = engine.first_emptiness(kappa);
        if (det.n != log_n1) {
            log = ra_initiations(model, engine.scenario_mut(), det.n, det.n, fwd);
            log_n1 = det.n;
        }
        const WorkVec upper_start =
            stationary_state_at(model, engine.scenario(), log, det.n, kappa);
        WindowRun run =
            sandwich_window(model, engine.scenario(), log, det.n, kappa, upper_start);
        if (!run.coalesced) continue;

        SandwichResult res;
        res.v0 = run.v0;
        res.q0 = run.q0;
        res.age_last_arrival = engine.scenario().t_back[0];
        res.kappa_final = kappa;
        res.tau = run.tau;
        res.coalesced = true;
        res.backward_arrivals = kappa;
        res.detection_depth = det.n;
        res.machinery_horizon = engine.ledger().horizon();
        res.steps = engine.steps_used();
        res.state0 = run.state0;
        return res;
    }
}

}  // namespace exactq
