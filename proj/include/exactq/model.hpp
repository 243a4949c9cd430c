#pragma once

#include <optional>
#include <utility>

#include "exactq/distribution.hpp"

#include <nlohmann/json_fwd.hpp>

namespace exactq {

// A GI/GI/c model: renewal interarrival law A, service law G, c servers.
struct ModelSpec {
    DistributionSpec arrival;
    DistributionSpec service;
    int c = 1;
    double rho = 0;        // lambda * E(S); stability requires rho < c
    bool emptiable = false;  // P(T > S) > 0, decided from the supports

    double lambda() const { return 1.0 / arrival.mean(); }
    double mu() const { return 1.0 / service.mean(); }

    static ModelSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// sup{t : P(T>t)>0} > inf{s : P(S>s)>0}.
bool supports_emptiable(const DistributionSpec& arrival, const DistributionSpec& service);

ModelSpec build_model(const DistributionSpec& arrival, const DistributionSpec& service, int c);

struct TiltOptions {
    std::optional<double> drift_a;  // default: midpoint of the feasible interval
    // The joint record sets used for coalescence detection only exist when
    // P(T > a) > 0. The Harris sampler works without them and relaxes this.
    bool require_joint_records = true;
    double m_slack = 1.0;    // m = ln(c)/theta* + m_slack
    int l_prime = 3;         // scalar descent milestones drop by l_prime * m_prime
    double m_prime_scale = 1.0;  // m_prime = m_prime_scale / eta*
    double truncation_b = 0;  // > 0: walk runs on min(T, b)
};

// Exponential-tilting parameters for the decomposed backward walks.
struct TiltContext {
    int c = 1;
    double a = 0;           // drift split constant, 1/mu < a < c/lambda
    double theta_star = 0;  // positive root of phi(theta) = log E e^{theta (a U(i) - T)}
    double m = 0;           // milestone height, strictly above ln(c)/theta*
    double eta_star = 0;    // positive root of psi(eta) = log E e^{eta (S - a)}
    double m_prime = 0;     // scalar up-crossing threshold
    int l_prime = 3;        // scalar descent multiple
    double truncation_b = 0;  // > 0 when the walk runs on min(T, b)
    bool joint_records_available = false;  // P(T > a) > 0 (with T truncated if active)

    // P'(U = i) for the tilted routing mark in the chosen direction.
    double tilted_direction_prob() const;
};

// log E exp(theta (a 1{U=i} - T)) = log((e^{theta a}-1)/c + 1) + log E e^{-theta T},
// with T replaced by min(T, b) when truncation_b > 0.
double phi_y(const ModelSpec& model, double a, double theta, double truncation_b = 0);
// log E exp(eta (S - a)); false when the service mgf diverges at eta.
bool psi_x(const ModelSpec& model, double a, double eta, double& out);

TiltContext solve_tilt(const ModelSpec& model, const TiltOptions& opts = {});
TiltContext solve_tilt(const ModelSpec& model, double a);

// Tilted routing mark: P'(U=index) = e^{theta a}/(e^{theta a}+c-1), uniform
// over the remaining servers otherwise.
int sample_tilted_direction(const TiltContext& ctx, int index, RngStream& rng);

// One step of the tilted proposal walk in direction `index`: the routing mark
// above plus T from the density proportional to e^{-theta t} a(t).
std::pair<int, double> sample_tilted_step(const TiltContext& ctx, int index, const ModelSpec& model,
                                          RngStream& rng);

}  // namespace exactq
