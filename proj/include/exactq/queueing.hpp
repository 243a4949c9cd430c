#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "exactq/walk.hpp"

namespace exactq {

using WorkVec = std::vector<double>;

// Kiefer-Wolfowitz update: service to the smallest coordinate, T drained from
// all, clamped at zero, re-sorted ascending.
WorkVec kw_step(WorkVec w, double s, double t);

// Random-assignment update: coordinate u gains S, all coordinates lose T.
WorkVec ra_step(WorkVec v, double s, int u, double t);

// Service initiations of the RA model reconstructed forward in time, in
// initiation order.
struct InitiationLog {
    std::vector<double> services;
    std::vector<double> times;  // relative to time 0 (negative before it)
    std::vector<int64_t> slot;  // arrival slot: backward -j -> depth - j; forward k -> depth + k
    std::vector<int> node;
    int64_t depth = 0;
};

// Composition at the window start for restarts that do not begin empty: at
// most one in-service customer per node, remaining time > 0 (0 = idle node).
struct RaInitState {
    std::vector<double> busy_remaining;
};

// Discrete-event reconstruction of the RA model from arrival -depth through
// time 0 and beyond, until at least `min_initiations` services have started.
// Services are the scenario's assigned draws; the forward extension appends
// fresh (T, S, U) to the scenario, reusing any already recorded. Ties break
// departures-first, lower node first.
InitiationLog ra_initiations(const ModelSpec& model, BackwardScenario& sc, int64_t depth,
                             int64_t min_initiations, RngStream& fwd,
                             const RaInitState* init = nullptr);

// Stationary FIFO detailed state as seen by a (virtual) arrival at time 0.
struct DetailedState {
    int64_t q0 = 0;                 // number in system at 0-
    int l0 = 0;                     // number in service, min(q0, c)
    std::vector<double> residuals;  // remaining services of those in service, ascending
};

// FIFO GI/GI/c event simulation from arrival -depth to 0-, services handed
// out at initiation from the log (FIFO initiates in arrival order).
DetailedState fifo_state_at_zero(const ModelSpec& model, const BackwardScenario& sc, int64_t depth,
                                 const InitiationLog& log, const RaInitState* init = nullptr);

struct SamplerOptions {
    uint64_t seed = 1;
    uint64_t replication = 0;
    EngineLimits limits;
    std::optional<double> drift_a;
    std::optional<double> truncation_b;  // run the dominating machinery on min(T, b)
    // false: stop at the first certified emptiness epoch (the stopping-time
    // definition itself; stays feasible as c grows). true: stop at the first
    // joint record of the decomposed walks instead.
    bool record_detection = false;
    std::ostream* trace = nullptr;
};

struct KwSampleResult {
    WorkVec w0;            // exact draw from the stationary K-W law
    DetailedState state0;  // detailed FIFO state at 0-
    int64_t n_depth = 0;   // detected stopping time N
    int64_t backward_arrivals = 0;  // N for this sampler
    int64_t machinery_horizon = 0;  // total backward arrivals the walks revealed
    int64_t steps = 0;
};

// The empty-RA sampler: coalescence at the first certified joint record,
// forward reconstruction, then N Kiefer-Wolfowitz steps from zero.
KwSampleResult sample_stationary_kw(const ModelSpec& model, const TiltContext& tilt,
                                    const SamplerOptions& opts);

// Convenience: solves the tilt (with truncation when requested) and samples.
KwSampleResult sample_stationary_kw(const ModelSpec& model, const SamplerOptions& opts);

struct TruncationRule {
    double b = 0;          // T^ = min(T, b)
    bool identity = true;  // T already bounded by b
    double truncated_arrival_mean = 0;
};

// Picks the smallest b with c E min(T,b) > 1.05 E(S) and P(min(T,b) > S) > 0.
// The walk engine runs on min(T, b); reconstructions always replay the
// original T draws, which the scenario stores pre-truncation.
TruncationRule truncation_wrap(const ModelSpec& model, std::optional<double> b = {});

}  // namespace exactq
