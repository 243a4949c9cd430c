#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "exactq/model.hpp"
#include "exactq/rng.hpp"

namespace exactq {

// Write-once record of all randomness a sample reveals: the backward
// sequences (T_{-j}, U_{-j}, S_{-j}) for j = 1..horizon and the forward
// extension (T_k, S_k, U_k) for k >= 0 past time 0. Reconstructions replay
// these values; they are never redrawn.
struct BackwardScenario {
    int c = 1;
    std::vector<double> t_back;  // t_back[j-1] = T_{-j}; original, pre-truncation
    std::vector<int> u_back;     // u_back[j-1] = U_{-j}, 0-based server index
    std::vector<double> s_back;  // s_back[j-1] = S_{-j}; NaN until revealed
    std::vector<double> t_fwd, s_fwd;
    std::vector<int> u_fwd;

    int64_t horizon() const { return static_cast<int64_t>(t_back.size()); }
    bool service_revealed(int64_t j) const;
    double service_at(int64_t j) const;            // S_{-j}, must be revealed
    void reveal_service(int64_t j, double value);  // write-once
};

// Backward multidimensional walk Y_{-n}(i) = sum_{j<=n} (a 1{U_{-j}=i} - T_{-j})
// with its milestone bookkeeping and the confirmed joint record set tau.
struct MilestoneLedger {
    int c = 1;
    std::vector<double> y;         // flat (horizon+1) x c, Y_0 = 0
    std::vector<int64_t> d_idx;    // downward milestones, d_idx[0] = 0
    std::vector<int64_t> gamma;    // paired up-crossings; -1 encodes infinity
    std::vector<int64_t> tau;      // confirmed joint records, ascending
    int64_t tau_complete_upto = 0;  // membership in tau decided for all n <= this
    std::vector<std::vector<int64_t>> routed;  // per server: ascending global indices j with U_{-j}=i

    int64_t horizon() const { return static_cast<int64_t>(y.size()) / c - 1; }
    const double* at(int64_t k) const { return &y[static_cast<size_t>(k) * c]; }
    // #{j in [1, n] : U_{-j} = server}
    int64_t count_upto(int server, int64_t n) const;
};

// Scalar per-server walk X^{(i)}_{-k} = sum_{j<=k} (S~_{-j} - a) over the
// services routed to server i, in backward auxiliary order.
struct ScalarLedger {
    int server = 0;
    std::vector<double> x;    // x[0] = 0
    std::vector<double> svc;  // svc[j-1] = j-th backward service draw for this server
    std::vector<int64_t> d_idx, gamma;
    std::vector<int64_t> tau;  // confirmed records, auxiliary indices
    int64_t tau_complete_upto = 0;

    int64_t horizon() const { return static_cast<int64_t>(x.size()) - 1; }
};

// One Algorithm-1 run: a nominal-measure path from the origin up to the last
// downward milestone Delta, together with the certificate that the walk never
// rises above Y_{-Delta} + m afterwards.
struct GlobalMaxSegment {
    int c = 1;
    std::vector<double> y;  // flat (delta+1) x c, relative to the origin
    std::vector<double> t;  // marks for steps 1..delta (original draws)
    std::vector<double> t_used;  // min(t, b) when truncation is active, else == t
    std::vector<int> u;
    std::vector<int64_t> d_idx, gamma;
    std::vector<double> m0;  // coordinate-wise max over [0, delta]

    int64_t delta() const { return static_cast<int64_t>(t.size()); }
    const double* at(int64_t k) const { return &y[static_cast<size_t>(k) * c]; }
};

struct EngineLimits {
    int64_t max_steps = 100'000'000;  // elementary steps per sample
};

struct CoalescenceResult {
    int64_t n = 0;           // detected stopping time N (joint record)
    int64_t horizon = 0;     // backward arrivals revealed by the machinery
    int64_t steps = 0;       // elementary steps consumed so far
};

// Exact simulation of the backward walks, their record sets, and the
// coalescence time. One engine = one sample's machinery; not thread-safe.
class BackwardEngine {
public:
    BackwardEngine(const ModelSpec& model, const TiltContext& tilt, uint64_t seed,
                   uint64_t replication, EngineLimits limits = {},
                   double truncation_b = 0 /* 0 = none */);

    // Algorithm 1 under the nominal measure, from a fresh origin.
    GlobalMaxSegment global_max_segment();

    // Algorithm 2: append accepted patches (segment global max <= m) until
    // `done` holds; confirms tau inside each newly certified window.
    void extend_multidim(const std::function<bool(const BackwardEngine&)>& done);

    // Algorithm 3, scalar analogue for one server.
    void extend_scalar(int server, const std::function<bool(const BackwardEngine&)>& done);

    // Algorithm 4: smallest certified joint record >= min_depth.
    CoalescenceResult coalescence(int64_t min_depth = 0);

    // Smallest n >= min_depth with V^0_{-n} = 0, certified from the milestone
    // caps alone: R at n dominates the observed suffix and the certified
    // bound on everything beyond the horizon. Detects the stopping time of
    // the emptiness definition itself, without waiting for a joint record,
    // which stays feasible as c grows.
    CoalescenceResult first_emptiness(int64_t min_depth = 0);

    // V^0_{-n} for n = 0..kappa, exact; closes the tail maximum at the first
    // certified emptiness epoch >= kappa.
    std::vector<std::vector<double>> backward_workloads(int64_t kappa);

    // Per-coordinate support for the Harris sampler: a certified epoch
    // n >= depth with V^0_{-n}(node) = 0 (node found empty by arrival -n).
    int64_t certified_empty_epoch(int node, int64_t depth);
    // Exact V^0_{-n}(node) for n = 0..upto given a certified record epoch >= upto.
    std::vector<double> coord_workloads(int node, int64_t upto, int64_t record_epoch);

    const ModelSpec& model() const { return model_; }
    const TiltContext& tilt() const { return tilt_; }
    const BackwardScenario& scenario() const { return scenario_; }
    BackwardScenario& scenario_mut() { return scenario_; }
    const MilestoneLedger& ledger() const { return ledger_; }
    const ScalarLedger& scalar(int server) const { return scalars_[server]; }
    int64_t steps_used() const { return steps_; }

    // Diagnostics for the patch-acceptance and up-crossing tests.
    int64_t patch_proposals = 0, patch_accepts = 0;
    int64_t upcross_proposals = 0, upcross_accepts = 0;

    void set_trace(std::ostream* os) { trace_ = os; }

private:
    struct ScalarSegment {
        std::vector<double> x;  // relative, x[0] = 0
        std::vector<double> svc;
        std::vector<int64_t> d_idx, gamma;
        double m0 = 0;
    };

    void bump_steps(int64_t k = 1);
    double draw_arrival_used(double& original);  // nominal T, truncated if active
    void commit_segment(const GlobalMaxSegment& seg);
    void confirm_tau();
    ScalarSegment scalar_segment(int server);
    void commit_scalar_segment(int server, const ScalarSegment& seg);
    void confirm_scalar_tau(int server);
    void sync_services(int server);
    // True simultaneous-record scan over the completed region; -1 if none.
    int64_t scan_joint_record(int64_t min_depth, int64_t& blocked_server, int64_t& blocked_count);
    // Extends the scalar ledgers until the reassembled walk is evaluable on
    // the whole [0, horizon] window, then returns R as a flat array and the
    // certified per-coordinate bound on every unobserved value beyond it.
    void cover_global_window();
    std::vector<double> assemble_r(int64_t upto) const;
    std::vector<double> tail_bound() const;

    ModelSpec model_;
    TiltContext tilt_;
    EngineLimits limits_;
    std::vector<std::pair<int64_t, int64_t>> detections_;  // (query depth, record), ascending by record
    std::vector<std::pair<int64_t, int64_t>> empties_;     // same, for first_emptiness
    double trunc_b_ = 0;
    BackwardScenario scenario_;
    MilestoneLedger ledger_;
    std::vector<ScalarLedger> scalars_;
    std::vector<int64_t> revealed_;  // per server: aux services already copied into the scenario
    RngStream arrival_rng_, routing_rng_, tilt_rng_;
    std::vector<RngStream> service_rng_;
    int64_t steps_ = 0;
    std::ostream* trace_ = nullptr;
};

// Replay helpers used by the always-on detection verification and the tests.
// R^{(r)}_n(i) rebuilt from the scenario with the canonical increment forms.
std::vector<std::vector<double>> replay_walk(const BackwardScenario& sc, double a, int64_t upto,
                                             double truncation_b = 0);

}  // namespace exactq
