#include "exactq/experiment.hpp"

#include <chrono>
#include <fstream>
#include <queue>

#include <nlohmann/json.hpp>

#ifdef EXACTQ_HAVE_OPENMP
#include <omp.h>
#endif

#include "exactq/errors.hpp"

namespace exactq {

std::string algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::empty_ra: return "empty-ra";
        case Algorithm::sandwich: return "sandwich";
        case Algorithm::harris: return "harris";
    }
    return "?";
}

Algorithm algorithm_from_name(const std::string& s) {
    if (s == "empty-ra" || s == "empty_ra") return Algorithm::empty_ra;
    if (s == "sandwich") return Algorithm::sandwich;
    if (s == "harris") return Algorithm::harris;
    throw InvalidParametersError("unknown algorithm '" + s + "'");
}

nlohmann::json SampleRecord::to_json(bool with_timing) const {
    nlohmann::json j{{"seed", seed},
                     {"replication", replication},
                     {"algorithm", algorithm},
                     {"N", n_depth},
                     {"W0", w0},
                     {"Q0", q0},
                     {"L0", l0},
                     {"residuals", residuals},
                     {"backward_arrivals", backward_arrivals}};
    if (with_timing) j["runtime_ms"] = runtime_ms;
    if (kappa_final >= 0) {
        j["kappa_final"] = kappa_final;
        j["tau"] = tau;
        j["coalesced"] = coalesced;
    }
    if (!error.empty()) j["error"] = error;
    return j;
}

namespace {

SampleRecord run_one(const ExperimentConfig& cfg, const TiltContext& tilt, int64_t rep) {
    SampleRecord rec;
    rec.seed = cfg.seed;
    rec.replication = rep;
    rec.algorithm = algorithm_name(cfg.algorithm);
    SamplerOptions opts;
    opts.seed = cfg.seed;
    opts.replication = static_cast<uint64_t>(rep);
    opts.limits = cfg.limits;
    opts.drift_a = cfg.drift_a;
    opts.truncation_b = cfg.truncation_b;

    const auto t0 = std::chrono::steady_clock::now();
    try {
        switch (cfg.algorithm) {
            case Algorithm::empty_ra: {
                const KwSampleResult r = sample_stationary_kw(cfg.model, tilt, opts);
                rec.n_depth = r.n_depth;
                rec.w0 = r.w0;
                rec.q0 = r.state0.q0;
                rec.l0 = r.state0.l0;
                rec.residuals = r.state0.residuals;
                rec.backward_arrivals = r.backward_arrivals;
                break;
            }
            case Algorithm::sandwich: {
                const SandwichResult r =
                    sample_stationary_sandwich(cfg.model, tilt, cfg.kappa0, opts);
                rec.n_depth = r.detection_depth;
                rec.w0 = r.v0;
                rec.q0 = r.q0;
                rec.l0 = r.state0.l0;
                rec.residuals = r.state0.residuals;
                rec.backward_arrivals = r.backward_arrivals;
                rec.kappa_final = r.kappa_final;
                rec.tau = r.tau;
                rec.coalesced = r.coalesced;
                break;
            }
            case Algorithm::harris: {
                HarrisConfig hc;
                hc.epsilon = cfg.harris_epsilon;
                const HarrisSampleResult r = harris_sample_c2(cfg.model, tilt, hc, opts);
                rec.n_depth = r.n_depth;
                rec.w0 = r.w0;
                rec.q0 = r.state0.q0;
                rec.l0 = r.state0.l0;
                rec.residuals = r.state0.residuals;
                rec.backward_arrivals = r.backward_arrivals;
                break;
            }
        }
    } catch (const Error& e) {
        rec.error = e.what();
    }
    rec.runtime_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

}  // namespace

Report run_experiment(const ExperimentConfig& cfg) {
    if (cfg.n < 1) throw InvalidParametersError("sample count must be >= 1");
    TiltOptions topt;
    topt.drift_a = cfg.drift_a;
    if (cfg.truncation_b) topt.truncation_b = *cfg.truncation_b;
    topt.require_joint_records = cfg.algorithm != Algorithm::harris;
    const TiltContext tilt = solve_tilt(cfg.model, topt);

    Report report;
    report.records.resize(cfg.n);

#ifdef EXACTQ_HAVE_OPENMP
    if (cfg.workers > 1) {
        omp_set_num_threads(cfg.workers);
#pragma omp parallel for schedule(dynamic)
        for (int64_t rep = 0; rep < cfg.n; ++rep)
            report.records[rep] = run_one(cfg, tilt, rep);
    } else
#endif
    {
        // Serial reference path; must produce the identical record multiset.
        for (int64_t rep = 0; rep < cfg.n; ++rep) report.records[rep] = run_one(cfg, tilt, rep);
    }

    std::vector<double> q0s, back, rts, delays;
    for (const auto& r : report.records) {
        if (!r.error.empty()) {
            ++report.aggregates.failures;
            continue;
        }
        q0s.push_back(static_cast<double>(r.q0));
        back.push_back(static_cast<double>(r.backward_arrivals));
        rts.push_back(r.runtime_ms);
        if (!r.w0.empty()) delays.push_back(r.w0.front());
    }
    report.aggregates.q0 = mean_ci95(q0s);
    report.aggregates.backward_arrivals = mean_ci95(back);
    report.aggregates.runtime_ms = mean_ci95(rts);
    report.aggregates.delay = mean_ci95(delays);
    return report;
}

void write_jsonl(const Report& report, const std::string& path, bool with_timing) {
    std::ofstream os(path);
    if (!os) throw Error("Io", "cannot open '" + path + "' for writing");
    for (const auto& r : report.records) os << r.to_json(with_timing).dump() << "\n";
}

std::vector<double> forward_fifo_number_pmf(const ModelSpec& model, int64_t arrivals,
                                            int64_t burn_in, uint64_t seed, int k_max) {
    RngStream rng(seed, 0, stream_role::harness);
    const int c = model.c;
    std::priority_queue<double, std::vector<double>, std::greater<>> busy;
    int64_t waiting = 0;
    std::vector<double> counts(k_max + 1, 0.0);
    double next_arrival = model.arrival.sample(rng);
    int64_t recorded = 0;
    for (int64_t n = 0; n < arrivals; ++n) {
        // Completions strictly before the next arrival, chaining initiations
        // of waiting customers with fresh service draws.
        while (!busy.empty() && busy.top() <= next_arrival) {
            const double t = busy.top();
            busy.pop();
            if (waiting > 0) {
                --waiting;
                busy.push(t + model.service.sample(rng));
            }
        }
        if (n >= burn_in) {
            const int64_t q = static_cast<int64_t>(busy.size()) + waiting;
            counts[std::min<int64_t>(q, k_max)] += 1;
            ++recorded;
        }
        if (static_cast<int>(busy.size()) < c)
            busy.push(next_arrival + model.service.sample(rng));
        else
            ++waiting;
        next_arrival += model.arrival.sample(rng);
    }
    for (double& x : counts) x /= recorded;
    return counts;
}

}  // namespace exactq
