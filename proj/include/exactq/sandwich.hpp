#pragma once

#include "exactq/queueing.hpp"

namespace exactq {

// Upper and lower bounding FIFO workload vectors, evolved with a shared
// (S, T) stream from the inspection time.
struct BoundPair {
    WorkVec upper, lower;
};

// One arrival step applied to both bounds with identical draws.
BoundPair bound_step(BoundPair pair, double s, double t);

// Window evolution from the -kappa inspection point. `upper_pre`/`lower_pre`
// hold the pre-arrival states at epochs -kappa..-1 plus the state at 0-,
// recorded for the funnel checks.
struct WindowRun {
    bool coalesced = false;
    double tau = 0;     // coalescence time (<= 0), relative to the sampling instant
    int64_t q_tau = 0;  // number in system when the bounds meet
    WorkVec v0;         // ordered remaining workload at 0-
    int64_t q0 = 0;
    DetailedState state0;
    std::vector<WorkVec> upper_pre, lower_pre;
};

// Evolves the bounds over arrivals -kappa..-1 using the initiation-ordered
// services synced at the emptiness depth n1 (arrival -j consumes stream slot
// n1 - j), pins the true process at coalescence, and carries it to time 0.
// `upper_start` is the pre-arrival state of the stationary process at the
// inspection epoch; the lower bound starts empty.
WindowRun sandwich_window(const ModelSpec& model, const BackwardScenario& sc,
                          const InitiationLog& log, int64_t n1, int64_t kappa,
                          const WorkVec& upper_start);

// The stationary pre-arrival workload vector at epoch -kappa, reconstructed
// from the emptiness at -n1 with the slot-synced stream.
WorkVec stationary_state_at(const ModelSpec& model, const BackwardScenario& sc,
                            const InitiationLog& log, int64_t n1, int64_t kappa);

struct SandwichResult {
    WorkVec v0;
    int64_t q0 = 0;
    double age_last_arrival = 0;  // -t_{-1}
    int64_t kappa_final = 0;
    double tau = 0;
    bool coalesced = false;
    int64_t backward_arrivals = 0;  // kappa_final
    int64_t detection_depth = 0;    // emptiness depth n1 backing the exact V^0_{-kappa}
    int64_t machinery_horizon = 0;
    int64_t steps = 0;
    DetailedState state0;
};

// The inspection-time sampler with geometric back-off: kappa doubles until
// the bounds meet before time 0; all previously revealed randomness is
// reused verbatim across doublings.
SandwichResult sample_stationary_sandwich(const ModelSpec& model, const TiltContext& tilt,
                                          int64_t kappa0, const SamplerOptions& opts,
                                          int64_t kappa_cap = int64_t(1) << 24);

}  // namespace exactq
