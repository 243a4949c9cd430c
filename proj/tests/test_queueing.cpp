#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "exactq/errors.hpp"
#include "exactq/queueing.hpp"
#include "exactq/stats.hpp"
#include "oracles.hpp"

using namespace exactq;

namespace {
ModelSpec mm_model(double lambda, double mu, int c) {
    return build_model(DistributionSpec::exponential(lambda), DistributionSpec::exponential(mu), c);
}
}  // namespace

TEST_CASE("kw_step hand values") {
    CHECK(kw_step({0, 0}, 5, 2) == WorkVec{0, 3});
    CHECK(kw_step({1, 4}, 2, 3) == WorkVec{0, 1});
    CHECK(kw_step({0, 0, 0}, 0, 7) == WorkVec{0, 0, 0});
}

TEST_CASE("ra_step hand values") {
    CHECK(ra_step({1, 2}, 3, 0, 2) == WorkVec{2, 0});
    CHECK(ra_step({1, 2}, 3, 1, 2) == WorkVec{0, 3});
    CHECK(ra_step({1, 2}, 3, 1, 9) == WorkVec{0, 0});
}

TEST_CASE("kw_step is monotone in the state") {
    RngStream rng(61, 0, stream_role::harness);
    for (int rep = 0; rep < 2000; ++rep) {
        const int c = 1 + rng.uniform_int(4);
        WorkVec lo(c), hi(c);
        for (int i = 0; i < c; ++i) {
            lo[i] = 3 * rng.uniform();
            hi[i] = lo[i] + rng.uniform();
        }
        std::sort(lo.begin(), lo.end());
        std::sort(hi.begin(), hi.end());
        const double s = 2 * rng.uniform(), t = 2 * rng.uniform();
        const auto a = kw_step(lo, s, t), b = kw_step(hi, s, t);
        for (int i = 0; i < c; ++i) CHECK(a[i] <= b[i]);
    }
}

TEST_CASE("ra reconstruction: the three-customer routing pattern permutes services") {
    // c=2: customers 1 and 2 join node 1, customer 3 joins node 2 before
    // customer 1 departs, so the initiation order is (S1, S3, S2).
    BackwardScenario sc;
    sc.c = 2;
    // Backward indexing: j=3 is the earliest arrival.
    sc.t_back = {20.0, 1.0, 1.0};         // T_{-1}, T_{-2}, T_{-3}; time 0 is past C1's departure
    sc.u_back = {1, 0, 0};                // U_{-1}=node2, U_{-2}=node1, U_{-3}=node1
    sc.s_back = {2.0, 7.0, 10.0};         // S_{-1}, S_{-2}, S_{-3}
    const auto model = mm_model(3, 2, 2);
    RngStream fwd(71, 0, stream_role::forward);
    const auto log = ra_initiations(model, sc, 3, 3, fwd);
    REQUIRE(log.services.size() >= 3);
    CHECK(log.services[0] == 10.0);  // S_{-3} starts first
    CHECK(log.services[1] == 2.0);   // S_{-1} at the idle second node
    CHECK(log.services[2] == 7.0);   // S_{-2} waits for node 1
    CHECK(log.node[0] == 0);
    CHECK(log.node[1] == 1);
    CHECK(log.node[2] == 0);
}

TEST_CASE("ra reconstruction: idle nodes preserve arrival order; log is a sub-multiset") {
    const auto model = mm_model(3, 2, 2);
    RngStream fwd(73, 0, stream_role::forward);
    BackwardScenario sc;
    sc.c = 2;
    sc.t_back = {9, 9, 9, 9};
    sc.u_back = {0, 1, 0, 1};
    sc.s_back = {1, 2, 3, 4};
    const auto log = ra_initiations(model, sc, 4, 4, fwd);
    CHECK(log.services == std::vector<double>{4, 3, 2, 1});  // arrival order, all idle

    // Sub-multiset of the assigned services.
    RngStream fwd2(74, 0, stream_role::forward);
    BackwardEngine eng(mm_model(3, 2, 2), solve_tilt(mm_model(3, 2, 2)), 75, 0);
    const auto det = eng.first_emptiness();
    if (det.n > 0) {
        auto log2 = ra_initiations(mm_model(3, 2, 2), eng.scenario_mut(), det.n, det.n, fwd2);
        std::vector<double> assigned;
        for (int64_t j = 1; j <= det.n; ++j) assigned.push_back(eng.scenario().service_at(j));
        for (const auto& f : eng.scenario().s_fwd) assigned.push_back(f);
        std::sort(assigned.begin(), assigned.end());
        auto got = log2.services;
        std::sort(got.begin(), got.end());
        CHECK(std::includes(assigned.begin(), assigned.end(), got.begin(), got.end()));
    }
}

TEST_CASE("stationary sampler: N = 0 yields the zero vector and empty state") {
    const auto m = mm_model(3, 2, 2);
    const auto ctx = solve_tilt(m);
    bool seen_zero = false;
    for (int rep = 0; rep < 200 && !seen_zero; ++rep) {
        SamplerOptions o;
        o.seed = 81;
        o.replication = rep;
        const auto r = sample_stationary_kw(m, ctx, o);
        if (r.n_depth == 0) {
            seen_zero = true;
            CHECK(r.w0 == WorkVec{0, 0});
            CHECK(r.state0.q0 == 0);
            CHECK(r.state0.l0 == 0);
            CHECK(r.state0.residuals.empty());
        }
        CHECK(static_cast<int>(r.state0.residuals.size()) == r.state0.l0);
        CHECK(r.state0.l0 == std::min<int64_t>(r.state0.q0, m.c));
        for (double x : r.state0.residuals) CHECK(x > 0);
    }
    CHECK(seen_zero);
}

TEST_CASE("exactness at c=1: delay matches the M/M/1 closed form (KS)") {
    const auto m = mm_model(3, 4, 1);  // rho = 0.75
    const auto ctx = solve_tilt(m);
    std::vector<double> delays(4000);
    for (size_t rep = 0; rep < delays.size(); ++rep) {
        SamplerOptions o;
        o.seed = 83;
        o.replication = rep;
        delays[rep] = sample_stationary_kw(m, ctx, o).w0[0];
    }
    const auto ks = ks_test(delays, oracles::mm1_delay_cdf(3, 4), oracles::mm1_delay_cdf_left(3, 4));
    CHECK(ks.p_value > 0.01);
    // Atom at zero has mass 1 - rho.
    const int64_t zeros = std::count(delays.begin(), delays.end(), 0.0);
    const double p = 0.25, n = static_cast<double>(delays.size());
    CHECK(std::abs(zeros - n * p) < 4 * std::sqrt(n * p * (1 - p)));
}

TEST_CASE("M/M/2 number in system matches the birth-death pmf (chi-square)") {
    const auto m = mm_model(3, 2, 2);
    const auto ctx = solve_tilt(m);
    std::vector<int64_t> q(3000);
    for (size_t rep = 0; rep < q.size(); ++rep) {
        SamplerOptions o;
        o.seed = 87;
        o.replication = rep;
        q[rep] = sample_stationary_kw(m, ctx, o).state0.q0;
    }
    const auto ref = erlang_pmf(3, 2, 2, 100);
    const auto gof = chi_square_gof(q, ref.pmf);
    CHECK(gof.p_value > 0.01);
}

TEST_CASE("record-detection route gives the same stationary law") {
    const auto m = mm_model(3, 2, 2);
    const auto ctx = solve_tilt(m);
    std::vector<int64_t> q(600);
    for (size_t rep = 0; rep < q.size(); ++rep) {
        SamplerOptions o;
        o.seed = 88;
        o.replication = rep;
        o.record_detection = true;
        q[rep] = sample_stationary_kw(m, ctx, o).state0.q0;
    }
    const auto ref = erlang_pmf(3, 2, 2, 100);
    const auto gof = chi_square_gof(q, ref.pmf);
    CHECK(gof.p_value > 0.01);
}

TEST_CASE("truncation rule: analytic bound for exponential arrivals, identity when bounded") {
    const auto m = mm_model(3, 2, 2);
    const auto rule = truncation_wrap(m);
    // E min(T,b) = (1 - e^{-lambda b})/lambda; the auto b solves
    // c E min(T,b) = 1.05 E(S) as the smallest qualifying point.
    const double want = -std::log(1 - 3.0 * 1.05 * 0.5 / 2) / 3.0;
    CHECK(rule.b == doctest::Approx(want).epsilon(1e-6));
    CHECK_FALSE(rule.identity);
    CHECK(rule.truncated_arrival_mean ==
          doctest::Approx((1 - std::exp(-3 * rule.b)) / 3).epsilon(1e-9));

    const auto bounded =
        build_model(DistributionSpec::uniform(0.0, 0.5), DistributionSpec::exponential(9), 2);
    const auto r2 = truncation_wrap(bounded, 2.0);
    CHECK(r2.identity);

    const auto never = build_model(DistributionSpec::uniform(0.5, 0.9),
                                   DistributionSpec::shifted_exponential(1.0, 5.0), 2);
    CHECK_THROWS_AS(truncation_wrap(never), NoValidTruncationError);
}

TEST_CASE("truncated machinery: domination replay and exact output law") {
    const auto m = mm_model(3, 4, 1);
    const auto rule = truncation_wrap(m);
    TiltOptions topt;
    topt.truncation_b = rule.b;
    const auto ctx = solve_tilt(m, topt);

    std::vector<double> delays(2500);
    for (size_t rep = 0; rep < delays.size(); ++rep) {
        SamplerOptions o;
        o.seed = 91;
        o.replication = rep;
        o.truncation_b = rule.b;
        const auto r = sample_stationary_kw(m, ctx, o);
        delays[rep] = r.w0[0];
        if (rep < 50) {
            // Lemma coupling: per-node recursion under min(T,b) dominates the
            // recursion under T on the same scenario draws.
            BackwardEngine eng(m, ctx, 91, rep);
            const auto det = eng.first_emptiness();
            double v = 0, vhat = 0;
            for (int64_t j = det.n; j >= 1; --j) {
                const double s = eng.scenario().service_at(j);
                const double t = eng.scenario().t_back[j - 1];
                v = std::max(0.0, v + s - t);
                vhat = std::max(0.0, vhat + s - std::min(t, rule.b));
                CHECK(v <= vhat);
            }
        }
    }
    const auto ks = ks_test(delays, oracles::mm1_delay_cdf(3, 4), oracles::mm1_delay_cdf_left(3, 4));
    CHECK(ks.p_value > 0.01);
}

TEST_CASE("Lemma-1 coupling: FIFO is dominated by RA in counts and total work") {
    const auto m = mm_model(3, 2, 2);
    for (uint64_t seed = 0; seed < 50; ++seed) {
        const auto path = oracles::coupled_fifo_ra(m, 10000, 1000 + seed);
        for (size_t n = 0; n < path.q_fifo.size(); ++n) {
            REQUIRE(path.q_fifo[n] <= path.q_ra[n]);
            REQUIRE(path.v_fifo[n] <= path.v_ra[n] + 1e-9);
        }
    }
}

TEST_CASE("sampler output is deterministic in (seed, replication)") {
    const auto m = mm_model(3, 2, 2);
    const auto ctx = solve_tilt(m);
    SamplerOptions o;
    o.seed = 97;
    o.replication = 3;
    const auto a = sample_stationary_kw(m, ctx, o);
    const auto b = sample_stationary_kw(m, ctx, o);
    CHECK(a.n_depth == b.n_depth);
    CHECK(a.w0 == b.w0);
    CHECK(a.state0.q0 == b.state0.q0);
    CHECK(a.state0.residuals == b.state0.residuals);
}

TEST_CASE("non-emptiable models are redirected") {
    const auto never = build_model(DistributionSpec::uniform(0.5, 0.9),
                                   DistributionSpec::shifted_exponential(1.0, 5.0), 2);
    TiltOptions o;
    o.require_joint_records = false;
    const auto ctx = solve_tilt(never, o);
    SamplerOptions so;
    CHECK_THROWS_AS(sample_stationary_kw(never, ctx, so), NotApplicableError);
}

TEST_CASE("initiation log times are nondecreasing") {
    const auto m = mm_model(3, 2, 2);
    const auto ctx = solve_tilt(m);
    for (int rep = 0; rep < 20; ++rep) {
        BackwardEngine eng(m, ctx, 1919, rep);
        const auto det = eng.first_emptiness();
        if (det.n == 0) continue;
        RngStream fwd(1919, rep, stream_role::forward);
        const auto log = ra_initiations(m, eng.scenario_mut(), det.n, det.n, fwd);
        for (size_t k = 1; k < log.times.size(); ++k) REQUIRE(log.times[k] >= log.times[k - 1]);
        for (double s : log.services) REQUIRE(s >= 0);
    }
}
