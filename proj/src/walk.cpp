#include "exactq/walk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "exactq/errors.hpp"

namespace exactq {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Canonical increment forms. Every path value in the engine and every replay
// is accumulated with exactly these expressions, so comparisons of stored
// doubles are exact.
inline double y_incr(int coord, int u, double a, double t_used) {
    return coord == u ? (a - t_used) : -t_used;
}
inline double x_incr(double svc, double a) { return svc - a; }
}  // namespace

bool BackwardScenario::service_revealed(int64_t j) const {
    return j >= 1 && j <= horizon() && !std::isnan(s_back[j - 1]);
}

double BackwardScenario::service_at(int64_t j) const {
    EXACTQ_CHECK(service_revealed(j), "service not yet revealed");
    return s_back[j - 1];
}

void BackwardScenario::reveal_service(int64_t j, double value) {
    EXACTQ_CHECK(j >= 1 && j <= horizon(), "service index outside scenario");
    double& slot = s_back[j - 1];
    if (std::isnan(slot)) {
        slot = value;
        return;
    }
    EXACTQ_CHECK(slot == value, "write-once scenario violation");
}

int64_t MilestoneLedger::count_upto(int server, int64_t n) const {
    const auto& v = routed[server];
    return std::upper_bound(v.begin(), v.end(), n) - v.begin();
}

BackwardEngine::BackwardEngine(const ModelSpec& model, const TiltContext& tilt, uint64_t seed,
                               uint64_t replication, EngineLimits limits, double truncation_b)
    : model_(model),
      tilt_(tilt),
      limits_(limits),
      trunc_b_(truncation_b > 0 ? truncation_b : tilt.truncation_b),
      arrival_rng_(seed, replication, stream_role::arrival),
      routing_rng_(seed, replication, stream_role::routing),
      tilt_rng_(seed, replication, stream_role::tilt) {
    const int c = model_.c;
    scenario_.c = c;
    ledger_.c = c;
    ledger_.y.assign(c, 0.0);
    ledger_.d_idx = {0};
    ledger_.gamma = {-1};
    ledger_.tau_complete_upto = -1;
    ledger_.routed.resize(c);
    scalars_.resize(c);
    revealed_.assign(c, 0);
    for (int i = 0; i < c; ++i) {
        scalars_[i].server = i;
        scalars_[i].x = {0.0};
        scalars_[i].d_idx = {0};
        scalars_[i].gamma = {-1};
        scalars_[i].tau_complete_upto = -1;
        service_rng_.emplace_back(seed, replication, stream_role::service_base + i);
    }
}

void BackwardEngine::bump_steps(int64_t k) {
    steps_ += k;
    if (steps_ > limits_.max_steps)
        throw BudgetExceededError("elementary step budget exhausted (" +
                                  std::to_string(limits_.max_steps) + ")");
}

double BackwardEngine::draw_arrival_used(double& original) {
    original = model_.arrival.sample(arrival_rng_);
    return trunc_b_ > 0 ? std::min(original, trunc_b_) : original;
}

GlobalMaxSegment BackwardEngine::global_max_segment() {
    const int c = model_.c;
    const double a = tilt_.a;
    const double m = tilt_.m;
    const double theta = tilt_.theta_star;

    GlobalMaxSegment seg;
    seg.c = c;
    seg.y.assign(c, 0.0);
    seg.d_idx = {0};
    seg.gamma = {-1};
    std::vector<double> pos(c, 0.0), level(c, 0.0);

    std::vector<double> ppos(c), py;
    std::vector<double> pt, pt_used;
    std::vector<int> pu;

    while (true) {
        // Descent under the nominal measure until every coordinate sits
        // strictly below the last milestone level minus m.
        while (true) {
            bump_steps();
            const int u = routing_rng_.uniform_int(c);
            double t_orig;
            const double t_used = draw_arrival_used(t_orig);
            bool below = true;
            for (int i = 0; i < c; ++i) {
                pos[i] += y_incr(i, u, a, t_used);
                below = below && pos[i] < level[i] - m;
            }
            seg.y.insert(seg.y.end(), pos.begin(), pos.end());
            seg.t.push_back(t_orig);
            seg.t_used.push_back(t_used);
            seg.u.push_back(u);
            if (below) break;
        }
        seg.d_idx.push_back(seg.delta());
        level = pos;

        // Up-crossing proposal: tilted path until some coordinate exceeds m
        // relative to the milestone, accepted against the likelihood ratio.
        ++upcross_proposals;
        const int dir = tilt_rng_.uniform_int(c);
        std::fill(ppos.begin(), ppos.end(), 0.0);
        py.clear();
        pt.clear();
        pt_used.clear();
        pu.clear();
        bool crossed = false;
        while (!crossed) {
            bump_steps();
            const int u = sample_tilted_direction(tilt_, dir, tilt_rng_);
            double t_orig, t_used;
            if (trunc_b_ > 0) {
                // Rejection from the nominal law realizes the tilt of
                // min(T, b) while keeping the original draw for the scenario.
                while (true) {
                    t_orig = model_.arrival.sample(tilt_rng_);
                    t_used = std::min(t_orig, trunc_b_);
                    if (tilt_rng_.bernoulli(std::exp(-theta * t_used))) break;
                    bump_steps();
                }
            } else {
                t_orig = model_.arrival.sample_tilted_down(theta, tilt_rng_);
                t_used = t_orig;
            }
            for (int i = 0; i < c; ++i) {
                ppos[i] += y_incr(i, u, a, t_used);
                crossed = crossed || ppos[i] > m;
            }
            py.insert(py.end(), ppos.begin(), ppos.end());
            pt.push_back(t_orig);
            pt_used.push_back(t_used);
            pu.push_back(u);
        }
        double denom = 0;
        for (int i = 0; i < c; ++i) denom += std::exp(theta * ppos[i]) / c;
        const double accept_p = 1.0 / denom;
        EXACTQ_CHECK(accept_p <= c * std::exp(-theta * m) && accept_p < 1.0,
                     "up-crossing acceptance ratio bound violated");
        if (tilt_rng_.bernoulli(accept_p)) {
            ++upcross_accepts;
            const int64_t steps = static_cast<int64_t>(pu.size());
            for (int64_t k = 0; k < steps; ++k) {
                for (int i = 0; i < c; ++i) pos[i] = level[i] + py[k * c + i];
                seg.y.insert(seg.y.end(), pos.begin(), pos.end());
            }
            // pos now holds the true continuation point for the next descent
            // (level + proposal end, coordinate-wise, single rounding).
            seg.t.insert(seg.t.end(), pt.begin(), pt.end());
            seg.t_used.insert(seg.t_used.end(), pt_used.begin(), pt_used.end());
            seg.u.insert(seg.u.end(), pu.begin(), pu.end());
            seg.gamma.push_back(seg.delta());
        } else {
            seg.gamma.push_back(-1);
            break;
        }
    }

    seg.m0.assign(c, 0.0);
    const int64_t n = seg.delta();
    for (int64_t k = 0; k <= n; ++k)
        for (int i = 0; i < c; ++i) seg.m0[i] = std::max(seg.m0[i], seg.y[k * c + i]);
    return seg;
}

void BackwardEngine::commit_segment(const GlobalMaxSegment& seg) {
    const int c = model_.c;
    const int64_t base = ledger_.horizon();
    const int64_t delta = seg.delta();
    std::vector<double> pos(ledger_.at(base), ledger_.at(base) + c);
    const size_t first_d = ledger_.d_idx.size();
    for (int64_t k = 1; k <= delta; ++k) {
        const int u = seg.u[k - 1];
        const double t_used = seg.t_used[k - 1];
        // Re-accumulate globally so the committed path is bit-identical to a
        // replay of the scenario.
        for (int i = 0; i < c; ++i) pos[i] += y_incr(i, u, tilt_.a, t_used);
        ledger_.y.insert(ledger_.y.end(), pos.begin(), pos.end());
        scenario_.t_back.push_back(seg.t[k - 1]);
        scenario_.u_back.push_back(u);
        scenario_.s_back.push_back(kNaN);
        ledger_.routed[u].push_back(base + k);
    }
    for (size_t j = 1; j < seg.d_idx.size(); ++j) ledger_.d_idx.push_back(base + seg.d_idx[j]);
    for (size_t j = 1; j < seg.gamma.size(); ++j)
        ledger_.gamma.push_back(seg.gamma[j] < 0 ? -1 : base + seg.gamma[j]);

    if (trace_) {
        for (int64_t k = base + 1; k <= base + delta; ++k) {
            *trace_ << k << "," << scenario_.u_back[k - 1] + 1 << "," << scenario_.t_back[k - 1];
            for (int i = 0; i < c; ++i) *trace_ << "," << ledger_.at(k)[i];
            const char* ev = "";
            for (size_t j = first_d; j < ledger_.d_idx.size(); ++j)
                if (ledger_.d_idx[j] == k) ev = "D";
            for (size_t j = first_d; j < ledger_.gamma.size(); ++j)
                if (ledger_.gamma[j] == k) ev = "G";
            *trace_ << "," << ev << "\n";
        }
    }

    for (int i = 0; i < c; ++i) sync_services(i);
    confirm_tau();
}

void BackwardEngine::confirm_tau() {
    // Records are confirmed up to the second-to-last downward milestone: the
    // walk is certified never to rise above Y at the last milestone plus m,
    // which stays below every candidate that dominates its observed suffix.
    const int c = model_.c;
    if (ledger_.d_idx.size() < 2) return;
    const int64_t bound = ledger_.d_idx[ledger_.d_idx.size() - 2];
    if (bound <= ledger_.tau_complete_upto) return;
    const int64_t lo = ledger_.tau_complete_upto + 1;
    const int64_t hi = ledger_.horizon();
    std::vector<double> runmax(c, -std::numeric_limits<double>::infinity());
    std::vector<int64_t> found;
    for (int64_t k = hi; k >= lo; --k) {
        const double* yk = ledger_.at(k);
        bool dominates = true;
        for (int i = 0; i < c; ++i) dominates = dominates && yk[i] >= runmax[i];
        if (dominates && k <= bound) found.push_back(k);
        for (int i = 0; i < c; ++i) runmax[i] = std::max(runmax[i], yk[i]);
    }
    for (auto it = found.rbegin(); it != found.rend(); ++it) ledger_.tau.push_back(*it);
    ledger_.tau_complete_upto = bound;
}

void BackwardEngine::extend_multidim(const std::function<bool(const BackwardEngine&)>& done) {
    if (ledger_.horizon() == 0) commit_segment(global_max_segment());
    while (!done(*this)) {
        ++patch_proposals;
        GlobalMaxSegment seg = global_max_segment();
        bool ok = true;
        for (int i = 0; i < model_.c; ++i) ok = ok && seg.m0[i] <= tilt_.m;
        if (ok) {
            ++patch_accepts;
            commit_segment(seg);
        }
    }
}

BackwardEngine::ScalarSegment BackwardEngine::scalar_segment(int server) {
    const double a = tilt_.a;
    const double mp = tilt_.m_prime;
    const double drop = tilt_.l_prime * mp;
    const double eta = tilt_.eta_star;

    ScalarSegment seg;
    seg.x = {0.0};
    seg.d_idx = {0};
    seg.gamma = {-1};
    double pos = 0, level = 0;
    std::vector<double> px, psvc;

    while (true) {
        while (true) {
            bump_steps();
            const double svc = model_.service.sample(service_rng_[server]);
            pos += x_incr(svc, a);
            seg.x.push_back(pos);
            seg.svc.push_back(svc);
            if (pos < level - drop) break;
        }
        seg.d_idx.push_back(static_cast<int64_t>(seg.x.size()) - 1);
        level = pos;

        ++upcross_proposals;
        px.clear();
        psvc.clear();
        double rel = 0;
        while (rel <= mp) {
            bump_steps();
            const double svc = model_.service.sample_tilted_up(eta, tilt_rng_);
            rel += x_incr(svc, a);
            px.push_back(rel);
            psvc.push_back(svc);
        }
        const double accept_p = std::exp(-eta * rel);
        EXACTQ_CHECK(accept_p <= std::exp(-eta * mp) && accept_p < 1.0,
                     "scalar up-crossing acceptance ratio bound violated");
        if (tilt_rng_.bernoulli(accept_p)) {
            ++upcross_accepts;
            for (size_t k = 0; k < px.size(); ++k) {
                seg.x.push_back(level + px[k]);
                seg.svc.push_back(psvc[k]);
            }
            pos = level + px.back();
            seg.gamma.push_back(static_cast<int64_t>(seg.x.size()) - 1);
        } else {
            seg.gamma.push_back(-1);
            break;
        }
    }
    seg.m0 = *std::max_element(seg.x.begin(), seg.x.end());
    return seg;
}

void BackwardEngine::commit_scalar_segment(int server, const ScalarSegment& seg) {
    ScalarLedger& sl = scalars_[server];
    const int64_t base = sl.horizon();
    double pos = sl.x[base];
    for (size_t k = 0; k < seg.svc.size(); ++k) {
        pos += x_incr(seg.svc[k], tilt_.a);
        sl.x.push_back(pos);
        sl.svc.push_back(seg.svc[k]);
    }
    for (size_t j = 1; j < seg.d_idx.size(); ++j) sl.d_idx.push_back(base + seg.d_idx[j]);
    for (size_t j = 1; j < seg.gamma.size(); ++j)
        sl.gamma.push_back(seg.gamma[j] < 0 ? -1 : base + seg.gamma[j]);
    sync_services(server);
    confirm_scalar_tau(server);
}

void BackwardEngine::confirm_scalar_tau(int server) {
    ScalarLedger& sl = scalars_[server];
    if (sl.d_idx.size() < 2) return;
    const int64_t bound = sl.d_idx[sl.d_idx.size() - 2];
    if (bound <= sl.tau_complete_upto) return;
    const int64_t lo = sl.tau_complete_upto + 1;
    const int64_t hi = sl.horizon();
    double runmax = -std::numeric_limits<double>::infinity();
    std::vector<int64_t> found;
    for (int64_t k = hi; k >= lo; --k) {
        if (sl.x[k] >= runmax && k <= bound) found.push_back(k);
        runmax = std::max(runmax, sl.x[k]);
    }
    for (auto it = found.rbegin(); it != found.rend(); ++it) sl.tau.push_back(*it);
    sl.tau_complete_upto = bound;
}

void BackwardEngine::extend_scalar(int server, const std::function<bool(const BackwardEngine&)>& done) {
    ScalarLedger& sl = scalars_[server];
    if (sl.horizon() == 0) commit_scalar_segment(server, scalar_segment(server));
    while (!done(*this)) {
        ++patch_proposals;
        ScalarSegment seg = scalar_segment(server);
        if (seg.m0 <= tilt_.m_prime) {
            ++patch_accepts;
            commit_scalar_segment(server, seg);
        }
    }
}

void BackwardEngine::sync_services(int server) {
    // Memoize scalar service draws into the scenario once the routing marks
    // give them a global index.
    const auto& routed = ledger_.routed[server];
    const auto& svc = scalars_[server].svc;
    int64_t& done = revealed_[server];
    const int64_t n = std::min<int64_t>(routed.size(), svc.size());
    for (; done < n; ++done) scenario_.reveal_service(routed[done], svc[done]);
}

int64_t BackwardEngine::scan_joint_record(int64_t min_depth, int64_t& blocked_server,
                                          int64_t& blocked_count) {
    blocked_server = -1;
    for (int64_t n : ledger_.tau) {
        if (n < min_depth) continue;
        bool member = true;
        for (int i = 0; i < model_.c && member; ++i) {
            const int64_t cnt = ledger_.count_upto(i, n);
            if (cnt > scalars_[i].tau_complete_upto) {
                blocked_server = i;
                blocked_count = cnt;
                return -2;  // candidate undecided: extend this scalar first
            }
            member = std::binary_search(scalars_[i].tau.begin(), scalars_[i].tau.end(), cnt);
        }
        if (member) return n;
    }
    return -1;
}

CoalescenceResult BackwardEngine::coalescence(int64_t min_depth) {
    if (!tilt_.joint_records_available)
        throw NotApplicableError("joint record detection needs P(T > a) > 0");
    // A detection found for a shallower query stays minimal for any deeper
    // window it covers: no record exists between its query depth and it.
    for (const auto& [query_depth, d] : detections_)
        if (d >= min_depth && min_depth >= query_depth) return {d, ledger_.horizon(), steps_};
    while (true) {
        int64_t blocked_server, blocked_count;
        const int64_t n = scan_joint_record(min_depth, blocked_server, blocked_count);
        if (n >= 0) {
            // Replay check: the reassembled walk never exceeds its value at N
            // over the whole observed (mapped) window.
            const int c = model_.c;
            int64_t upto = ledger_.horizon();
            for (int i = 0; i < c; ++i) {
                const auto& routed = ledger_.routed[i];
                const int64_t hor = scalars_[i].horizon();
                if (static_cast<int64_t>(routed.size()) > hor) upto = std::min(upto, routed[hor] - 1);
            }
            std::vector<int64_t> cnt(c);
            std::vector<double> rn(c);
            for (int i = 0; i < c; ++i) {
                cnt[i] = ledger_.count_upto(i, n);
                rn[i] = scalars_[i].x[cnt[i]] + ledger_.at(n)[i];
            }
            for (int64_t k = n + 1; k <= upto; ++k) {
                ++cnt[scenario_.u_back[k - 1]];
                for (int i = 0; i < c; ++i) {
                    const double rk = scalars_[i].x[cnt[i]] + ledger_.at(k)[i];
                    EXACTQ_CHECK(rk <= rn[i], "detected record exceeded on replay");
                }
            }
            detections_.emplace_back(min_depth, n);
            std::sort(detections_.begin(), detections_.end(),
                      [](const auto& a, const auto& b) { return a.second < b.second; });
            return {n, ledger_.horizon(), steps_};
        }
        if (n == -2) {
            extend_scalar(blocked_server, [&](const BackwardEngine& e) {
                return e.scalars_[blocked_server].tau_complete_upto >= blocked_count;
            });
            continue;
        }
        // No candidate in the completed region: one fresh record per server,
        // then extend the joint walk until each server has more arrivals than
        // confirmed records.
        std::vector<int64_t> need(model_.c);
        for (int i = 0; i < model_.c; ++i) {
            need[i] = static_cast<int64_t>(scalars_[i].tau.size()) + 1;
            extend_scalar(i, [&, i](const BackwardEngine& e) {
                return static_cast<int64_t>(e.scalars_[i].tau.size()) >= need[i];
            });
        }
        extend_multidim([&](const BackwardEngine& e) {
            for (int i = 0; i < e.model_.c; ++i) {
                if (static_cast<int64_t>(e.ledger_.routed[i].size()) <=
                    static_cast<int64_t>(e.scalars_[i].tau.size()))
                    return false;
            }
            return true;
        });
    }
}

void BackwardEngine::cover_global_window() {
    // The reassembled walk needs every backward service up to the horizon:
    // grow each scalar ledger past its server's routed count.
    for (int i = 0; i < model_.c; ++i) {
        const int64_t need = static_cast<int64_t>(ledger_.routed[i].size());
        if (scalars_[i].horizon() < need) {
            extend_scalar(i, [&, i, need](const BackwardEngine& e) {
                return e.scalars_[i].horizon() >= need;
            });
        }
    }
}

std::vector<double> BackwardEngine::assemble_r(int64_t upto) const {
    const int c = model_.c;
    std::vector<double> r(static_cast<size_t>(upto + 1) * c);
    std::vector<int64_t> cnt(c, 0);
    for (int64_t k = 0; k <= upto; ++k) {
        if (k > 0) ++cnt[scenario_.u_back[k - 1]];
        for (int i = 0; i < c; ++i) r[k * c + i] = scalars_[i].x[cnt[i]] + ledger_.at(k)[i];
    }
    return r;
}

std::vector<double> BackwardEngine::tail_bound() const {
    // For m beyond the horizon, X(i) sits at an auxiliary index at or past
    // count_i(horizon): bounded by the observed suffix there or the scalar
    // cap, while Y(i) is bounded by its own certificate at the horizon.
    const int c = model_.c;
    const int64_t h = ledger_.horizon();
    std::vector<double> bound(c);
    for (int i = 0; i < c; ++i) {
        const ScalarLedger& sl = scalars_[i];
        const int64_t from = static_cast<int64_t>(ledger_.routed[i].size());
        double xsup = sl.x[sl.horizon()] + tilt_.m_prime;
        for (int64_t j = from; j <= sl.horizon(); ++j) xsup = std::max(xsup, sl.x[j]);
        bound[i] = xsup + ledger_.at(h)[i] + tilt_.m;
    }
    return bound;
}

CoalescenceResult BackwardEngine::first_emptiness(int64_t min_depth) {
    for (const auto& [query_depth, d] : empties_)
        if (d >= min_depth && min_depth >= query_depth) return {d, ledger_.horizon(), steps_};
    const int c = model_.c;
    if (ledger_.horizon() < min_depth + 1) {
        extend_multidim([&](const BackwardEngine& e) {
            return e.ledger().horizon() >= min_depth + 1;
        });
    }
    while (true) {
        cover_global_window();
        const int64_t h = ledger_.horizon();
        const std::vector<double> r = assemble_r(h);
        const std::vector<double> tail = tail_bound();
        // Backward suffix maxima, then an ascending scan: the first epoch
        // whose R dominates both the observed suffix and the tail bound is
        // the minimal emptiness epoch. A candidate that dominates the suffix
        // but not yet the tail stays undecided, so the scan stops there.
        std::vector<double> sufmax(r.end() - c, r.end());
        std::vector<uint8_t> is_suffix_max(h + 1, 0);
        for (int64_t n = h; n >= min_depth; --n) {
            bool dom = true;
            for (int i = 0; i < c; ++i) {
                sufmax[i] = std::max(sufmax[i], r[n * c + i]);
                dom = dom && r[n * c + i] >= sufmax[i];
            }
            is_suffix_max[n] = dom;
        }
        int64_t undecided = -1;
        for (int64_t n = min_depth; n <= h; ++n) {
            if (!is_suffix_max[n]) continue;
            bool certified = true;
            for (int i = 0; i < c; ++i) certified = certified && r[n * c + i] >= tail[i];
            if (certified) {
                empties_.emplace_back(min_depth, n);
                std::sort(empties_.begin(), empties_.end(),
                          [](const auto& a, const auto& b) { return a.second < b.second; });
                return {n, ledger_.horizon(), steps_};
            }
            undecided = n;
            break;
        }
        (void)undecided;
        const int64_t grow = std::max<int64_t>(64, h / 4);
        extend_multidim(
            [&, h, grow](const BackwardEngine& e) { return e.ledger().horizon() >= h + grow; });
    }
}

std::vector<std::vector<double>> BackwardEngine::backward_workloads(int64_t kappa) {
    const CoalescenceResult det = first_emptiness(kappa);
    const int64_t n1 = det.n;
    const int c = model_.c;

    // R over [0, n1] with the canonical sum, then a backward suffix maximum:
    // beyond n1 the walk never exceeds R_{n1}, so the window maximum is exact.
    const std::vector<double> r = assemble_r(n1);
    std::vector<std::vector<double>> out(static_cast<size_t>(kappa) + 1,
                                         std::vector<double>(c, 0.0));
    std::vector<double> sufmax(r.end() - c, r.end());
    for (int64_t n = n1; n >= 0; --n) {
        for (int i = 0; i < c; ++i) {
            sufmax[i] = std::max(sufmax[i], r[n * c + i]);
            if (n <= kappa) out[n][i] = sufmax[i] - r[n * c + i];
        }
    }
    return out;
}

int64_t BackwardEngine::certified_empty_epoch(int node, int64_t depth) {
    if (ledger_.horizon() < depth + 1) {
        extend_multidim(
            [&](const BackwardEngine& e) { return e.ledger().horizon() >= depth + 1; });
    }
    while (true) {
        cover_global_window();
        const int64_t h = ledger_.horizon();
        const double tail = tail_bound()[node];
        // R(node) over [depth, h]: the node is empty at -n exactly when its
        // coordinate attains the suffix maximum and clears the tail bound.
        std::vector<double> r(h + 1);
        {
            int64_t cnt = 0;
            for (int64_t k = 0; k <= h; ++k) {
                if (k > 0 && scenario_.u_back[k - 1] == node) ++cnt;
                r[k] = scalars_[node].x[cnt] + ledger_.at(k)[node];
            }
        }
        double sufmax = -std::numeric_limits<double>::infinity();
        std::vector<uint8_t> is_max(h + 1, 0);
        for (int64_t n = h; n >= depth; --n) {
            sufmax = std::max(sufmax, r[n]);
            is_max[n] = r[n] >= sufmax;
        }
        for (int64_t n = depth; n <= h; ++n) {
            if (!is_max[n]) continue;
            if (r[n] >= tail) return n;
            break;  // undecided: the tail bound must sink first
        }
        const int64_t grow = std::max<int64_t>(64, h / 4);
        extend_multidim(
            [&, h, grow](const BackwardEngine& e) { return e.ledger().horizon() >= h + grow; });
    }
}

std::vector<double> BackwardEngine::coord_workloads(int node, int64_t upto, int64_t record_epoch) {
    EXACTQ_CHECK(record_epoch >= upto, "record epoch must reach past the requested window");
    std::vector<double> r(record_epoch + 1);
    int64_t cnt = 0;
    for (int64_t k = 0; k <= record_epoch; ++k) {
        if (k > 0 && scenario_.u_back[k - 1] == node) ++cnt;
        r[k] = scalars_[node].x[cnt] + ledger_.at(k)[node];
    }
    std::vector<double> out(upto + 1);
    double sufmax = r[record_epoch];
    for (int64_t n = record_epoch; n >= 0; --n) {
        sufmax = std::max(sufmax, r[n]);
        if (n <= upto) out[n] = sufmax - r[n];
    }
    return out;
}

std::vector<std::vector<double>> replay_walk(const BackwardScenario& sc, double a, int64_t upto,
                                             double truncation_b) {
    const int c = sc.c;
    std::vector<double> y(c, 0.0);
    std::vector<double> x(c, 0.0);
    std::vector<std::vector<double>> r(upto + 1, std::vector<double>(c, 0.0));
    for (int64_t k = 1; k <= upto; ++k) {
        const int u = sc.u_back[k - 1];
        const double t_used =
            truncation_b > 0 ? std::min(sc.t_back[k - 1], truncation_b) : sc.t_back[k - 1];
        for (int i = 0; i < c; ++i) y[i] += y_incr(i, u, a, t_used);
        x[u] += x_incr(sc.service_at(k), a);
        for (int i = 0; i < c; ++i) r[k][i] = x[i] + y[i];
    }
    return r;
}

}  // namespace exactq
