#pragma once

#include <optional>

#include "exactq/queueing.hpp"

namespace exactq {

// One continuous-time step on an exact discrete-stationary draw:
// W* = R(W0 + S e - T_e f)^+ with S ~ G and T_e from the equilibrium of A.
WorkVec continuous_time_kw(WorkVec w0, const ModelSpec& model, RngStream& rng);

enum class G1Method { mixture, lindley };

// Stationary workload of a GI/GI/1 queue from an exact delay draw:
// mixture (1-rho) delta_0 + rho (D + S_e), or (D + S - T_e)^+.
double stationary_workload_g1(const ModelSpec& model, const TiltContext& tilt, G1Method method,
                              const SamplerOptions& opts);

enum class Discipline { fifo, lifo, random_selection };

// Delay of a tagged arrival at time 0 under the chosen queue-selection rule,
// simulated forward from an exact stationary detailed state. Waiting
// customers receive fresh service draws at initiation.
double delay_under_discipline(const DetailedState& state, Discipline d, const ModelSpec& model,
                              RngStream& rng);

// Fork-Join: each arrival splits into c components, one per node; the job
// leaves when the last component finishes. Service vectors are iid across
// jobs; within a job either independent marginals or a common factor B + Z_i.
struct ForkJoinModel {
    DistributionSpec arrival;
    std::vector<DistributionSpec> components;      // marginals, or the Z_i parts
    std::optional<DistributionSpec> common_base;   // B in the common-factor form
    int c = 0;

    double component_mean(int i) const;
    double sample_component(int i, RngStream& rng) const;  // used with a shared B draw
};

ForkJoinModel build_forkjoin(DistributionSpec arrival, std::vector<DistributionSpec> components,
                             std::optional<DistributionSpec> common_base = {});

// Exact draw of the stationary pre-arrival workload vector V^0_0 of the FJ
// recursion, via the milestone walk on increments S(i) - T with
// per-coordinate tilt roots.
std::vector<double> forkjoin_v0(const ForkJoinModel& fj, const SamplerOptions& opts);

struct ForkJoinSample {
    double sojourn = 0;
    std::vector<double> v0;
    std::vector<double> service;
};

// H^0 = max_i (V^0_0(i) + S(i)) with an independent fresh service vector.
ForkJoinSample forkjoin_sojourn(const ForkJoinModel& fj, const SamplerOptions& opts);

struct HarrisConfig {
    double epsilon = 0;  // <= 0: use harris_default_epsilon
};

double harris_default_epsilon(const ModelSpec& model);

struct HarrisSampleResult {
    WorkVec w0;
    DetailedState state0;
    int64_t n_depth = 0;            // restart depth N (regeneration at N+1)
    int64_t backward_arrivals = 0;  // N
    int64_t machinery_horizon = 0;
    int64_t steps = 0;
    double regen_remaining = 0;  // shared residual service at the restart
};

// Exact stationary draw for c = 2, 1 < rho < 2, P(T > S) = 0, via the
// single-customer regeneration event {Q=1, V(1)=0, V(2)<=eps, T>eps, U=1}.
HarrisSampleResult harris_sample_c2(const ModelSpec& model, const TiltContext& tilt,
                                    const HarrisConfig& cfg, const SamplerOptions& opts);

// Tilt options suited to the Harris sampler (joint records not required).
TiltContext solve_tilt_harris(const ModelSpec& model);

}  // namespace exactq
