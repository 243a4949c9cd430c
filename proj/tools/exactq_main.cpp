// Command-line front end: exact stationary sampling, validation against
// closed-form or brute-force references, and the benchmark tables.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "exactq/errors.hpp"
#include "exactq/experiment.hpp"

using namespace exactq;

namespace {

ModelSpec load_model(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("Io", "cannot read model file '" + path + "'");
    nlohmann::json j;
    is >> j;
    return ModelSpec::from_json(j);
}

bool is_mmc(const ModelSpec& m) {
    return m.arrival.family() == Family::exponential && m.service.family() == Family::exponential;
}

void print_summary_header(std::ostream& os) {
    os << "lambda,rho,algorithm,mean_backward_arrivals,ci_halfwidth,n\n";
}

void print_summary_row(std::ostream& os, double lambda, double rho, const std::string& alg,
                       const MeanCi& ci) {
    os << lambda << "," << rho << "," << alg << "," << ci.mean << "," << ci.half_width << ","
       << ci.n << "\n";
}

int cmd_sample(const ExperimentConfig& cfg, const std::string& out, const std::string& trace_path) {
    if (!trace_path.empty() && cfg.n >= 1) {
        // Trace the first replication, then run the batch normally.
        std::ofstream tr(trace_path);
        SamplerOptions o;
        o.seed = cfg.seed;
        o.replication = 0;
        o.limits = cfg.limits;
        o.trace = &tr;
        TiltOptions topt;
        topt.drift_a = cfg.drift_a;
        if (cfg.truncation_b) topt.truncation_b = *cfg.truncation_b;
        topt.require_joint_records = cfg.algorithm != Algorithm::harris;
        const TiltContext tilt = solve_tilt(cfg.model, topt);
        if (cfg.algorithm == Algorithm::sandwich)
            sample_stationary_sandwich(cfg.model, tilt, cfg.kappa0, o);
        else if (cfg.algorithm == Algorithm::empty_ra)
            sample_stationary_kw(cfg.model, tilt, o);
        else
            harris_sample_c2(cfg.model, tilt, HarrisConfig{cfg.harris_epsilon}, o);
    }
    const Report report = run_experiment(cfg);
    if (!out.empty())
        write_jsonl(report, out);
    else
        for (const auto& r : report.records) std::cout << r.to_json().dump() << "\n";
    std::cerr << "n=" << report.records.size() << " failures=" << report.aggregates.failures
              << " mean_Q0=" << report.aggregates.q0.mean << " +-"
              << report.aggregates.q0.half_width
              << " mean_backward_arrivals=" << report.aggregates.backward_arrivals.mean << "\n";
    return report.aggregates.failures == 0 ? 0 : 2;
}

int cmd_validate(const ExperimentConfig& cfg, const std::string& oracle, double alpha,
                 const std::string& plot_out) {
    const Report report = run_experiment(cfg);
    std::vector<int64_t> q;
    for (const auto& r : report.records)
        if (r.error.empty()) q.push_back(r.q0);
    if (q.size() < 100) throw InsufficientDataError("too few successful replications");

    int k_max = 0;
    for (int64_t v : q) k_max = std::max<int>(k_max, static_cast<int>(v));
    k_max = std::max(k_max + 10, 50);

    std::vector<double> ref;
    if (oracle == "erlang") {
        if (!is_mmc(cfg.model))
            throw InvalidParametersError(
                "the erlang oracle applies to exponential/exponential models only");
        ref = erlang_pmf(cfg.model.lambda(), cfg.model.mu(), cfg.model.c, k_max).pmf;
    } else if (oracle == "brute-force") {
        ref = forward_fifo_number_pmf(cfg.model, 2000000, 200000, cfg.seed + 1, k_max);
    } else {
        throw InvalidParametersError("unknown oracle '" + oracle + "'");
    }

    const GofResult gof = chi_square_gof(q, ref);
    if (!plot_out.empty()) {
        std::ofstream os(plot_out);
        os << "bin,empirical_freq,analytic_pmf\n";
        std::vector<double> emp(k_max + 1, 0.0);
        for (int64_t v : q) emp[std::min<int64_t>(v, k_max)] += 1.0 / q.size();
        for (int k = 0; k <= k_max; ++k) os << k << "," << emp[k] << "," << ref[k] << "\n";
    }
    const bool pass = gof.p_value >= alpha;
    std::cout << "chi_square=" << gof.statistic << " dof=" << gof.dof << " p=" << gof.p_value
              << " alpha=" << alpha << " => " << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? 0 : 1;
}

int cmd_bench_table1(int64_t n, uint64_t seed, bool full) {
    print_summary_header(std::cout);
    std::vector<double> lambdas = {5, 6, 7, 8};
    if (full) lambdas.push_back(9);
    for (double lambda : lambdas) {
        ExperimentConfig cfg;
        cfg.model = build_model(DistributionSpec::exponential(lambda),
                                DistributionSpec::exponential(5), 2);
        cfg.algorithm = Algorithm::sandwich;
        cfg.n = n;
        cfg.seed = seed;
        const Report rep = run_experiment(cfg);
        print_summary_row(std::cout, lambda, lambda / 10.0, "sandwich",
                          rep.aggregates.backward_arrivals);
    }
    return 0;
}

int cmd_bench_fig3(int64_t n, uint64_t seed) {
    ExperimentConfig cfg;
    cfg.model =
        build_model(DistributionSpec::exponential(10), DistributionSpec::exponential(2), 10);
    cfg.n = n;
    cfg.seed = seed;
    print_summary_header(std::cout);
    cfg.algorithm = Algorithm::sandwich;
    const Report sand = run_experiment(cfg);
    print_summary_row(std::cout, 10, 0.5, "sandwich", sand.aggregates.backward_arrivals);
    cfg.algorithm = Algorithm::empty_ra;
    const Report ra = run_experiment(cfg);
    print_summary_row(std::cout, 10, 0.5, "empty-ra", ra.aggregates.backward_arrivals);
    return 0;
}

int cmd_bench_scaling(int64_t n, uint64_t seed, int workers) {
    ExperimentConfig cfg;
    cfg.model = build_model(DistributionSpec::exponential(3), DistributionSpec::exponential(2), 2);
    cfg.algorithm = Algorithm::sandwich;
    cfg.n = n;
    cfg.seed = seed;
    std::cout << "workers,samples,wall_ms,samples_per_s\n";
    for (int w : {1, workers}) {
        cfg.workers = w;
        const auto t0 = std::chrono::steady_clock::now();
        const Report rep = run_experiment(cfg);
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        std::cout << w << "," << rep.records.size() << "," << ms << ","
                  << 1000.0 * rep.records.size() / ms << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exact stationary sampling for FIFO GI/GI/c queues and related models"};
    app.require_subcommand(1);

    std::string model_path, out, trace_path, plot_out, oracle = "erlang", algorithm = "empty-ra";
    int64_t n = 1000;
    uint64_t seed = 1;
    int workers = 1;
    int64_t kappa0 = 16;
    double alpha = 0.01, epsilon = 0;
    double drift_a_val = 0, truncate_b_val = 0;
    bool table1 = false, fig3 = false, scaling = false, full = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--model", model_path, "model config (json)")->required();
        sub->add_option("--algorithm", algorithm, "empty-ra | sandwich | harris");
        sub->add_option("--n", n, "number of replications");
        sub->add_option("--seed", seed, "base seed");
        sub->add_option("--workers", workers, "parallel replications (1 = serial)");
        sub->add_option("--kappa0", kappa0, "initial sandwich inspection depth");
        sub->add_option("--drift-a", drift_a_val, "drift split constant a (0 = auto)");
        sub->add_option("--truncate-b", truncate_b_val,
                        "run the dominating walk on min(T, b) (0 = off)");
        sub->add_option("--epsilon", epsilon, "Harris regeneration epsilon (0 = auto)");
    };

    auto* s_sample = app.add_subcommand("sample", "draw exact stationary samples");
    add_common(s_sample);
    s_sample->add_option("--out", out, "JSON-lines output path (stdout if omitted)");
    s_sample->add_option("--trace", trace_path, "CSV walk trace of the first replication");

    auto* s_validate = app.add_subcommand("validate", "chi-square the sampler against a reference");
    add_common(s_validate);
    s_validate->add_option("--oracle", oracle, "erlang | brute-force");
    s_validate->add_option("--alpha", alpha, "rejection level");
    s_validate->add_option("--plot-out", plot_out, "plot-data CSV (bin, empirical, analytic)");

    auto* s_bench = app.add_subcommand("bench", "benchmark tables");
    s_bench->add_flag("--table1", table1, "sandwich complexity vs traffic intensity");
    s_bench->add_flag("--fig3", fig3, "sandwich vs empty-RA detection depth at c=10");
    s_bench->add_flag("--scaling", scaling, "serial vs parallel replication throughput");
    s_bench->add_flag("--full", full, "include the long rho=0.9 row");
    s_bench->add_option("--n", n, "replications per row");
    s_bench->add_option("--seed", seed, "base seed");
    s_bench->add_option("--workers", workers, "parallel replications for --scaling");

    CLI11_PARSE(app, argc, argv);

    try {
        if (s_bench->parsed()) {
            if (table1) return cmd_bench_table1(n, seed, full);
            if (fig3) return cmd_bench_fig3(n, seed);
            if (scaling) return cmd_bench_scaling(n, seed, workers > 1 ? workers : 4);
            std::cerr << "bench needs one of --table1 | --fig3 | --scaling\n";
            return 64;
        }
        ExperimentConfig cfg;
        cfg.model = load_model(model_path);
        cfg.algorithm = algorithm_from_name(algorithm);
        cfg.n = n;
        cfg.seed = seed;
        cfg.workers = workers;
        cfg.kappa0 = kappa0;
        if (drift_a_val > 0) cfg.drift_a = drift_a_val;
        if (truncate_b_val > 0) cfg.truncation_b = truncate_b_val;
        cfg.harris_epsilon = epsilon;
        if (s_sample->parsed()) return cmd_sample(cfg, out, trace_path);
        return cmd_validate(cfg, oracle, alpha, plot_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 65;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 66;
    }
}
