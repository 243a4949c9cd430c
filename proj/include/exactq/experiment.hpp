#pragma once

#include <string>

#include "exactq/extensions.hpp"
#include "exactq/sandwich.hpp"
#include "exactq/stats.hpp"

#include <nlohmann/json_fwd.hpp>

namespace exactq {

enum class Algorithm { empty_ra, sandwich, harris };

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& s);

struct ExperimentConfig {
    ModelSpec model;
    Algorithm algorithm = Algorithm::empty_ra;
    int64_t n = 1000;
    uint64_t seed = 1;
    int workers = 1;  // 1 = serial reference path; > 1 = OpenMP
    int64_t kappa0 = 16;
    EngineLimits limits;
    std::optional<double> drift_a;
    std::optional<double> truncation_b;
    double harris_epsilon = 0;  // <= 0: model-derived default
};

// One stationary draw, as written to the JSON-lines output.
struct SampleRecord {
    uint64_t seed = 0;
    int64_t replication = 0;
    std::string algorithm;
    int64_t n_depth = 0;
    std::vector<double> w0;
    int64_t q0 = 0;
    int l0 = 0;
    std::vector<double> residuals;
    double runtime_ms = 0;
    int64_t backward_arrivals = 0;
    // Sandwich extras.
    int64_t kappa_final = -1;
    double tau = 0;
    bool coalesced = true;
    std::string error;  // nonempty when this replication failed

    // Wall-clock timing varies run to run; exclude it when byte-identical
    // output is the point.
    nlohmann::json to_json(bool with_timing = true) const;
};

struct ReportAggregates {
    MeanCi q0, backward_arrivals, runtime_ms, delay;
    int64_t failures = 0;
};

struct Report {
    std::vector<SampleRecord> records;  // ordered by replication
    ReportAggregates aggregates;
};

// Runs n replications with per-replication streams derived from (seed,
// replication); scheduling cannot change any record. Failed replications
// carry their error string instead of aborting the batch.
Report run_experiment(const ExperimentConfig& cfg);

void write_jsonl(const Report& report, const std::string& path, bool with_timing = true);

// Long-run forward simulation of the FIFO GI/GI/c number in system at
// arrival epochs; the brute-force reference for `validate`.
std::vector<double> forward_fifo_number_pmf(const ModelSpec& model, int64_t arrivals,
                                            int64_t burn_in, uint64_t seed, int k_max);

}  // namespace exactq
