#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace vfl {

struct GameParams {
    std::size_t n = 1;                // vehicles training local models
    std::size_t n_rly = 1;            // relays paying them
    std::vector<double> alphas{1.0};  // per-vehicle quadratic cost coefficients
    double beta = 1.0;                // compensation scale paid by the originator
    double i_incentive = 0.0;         // incentive per data unit
    std::vector<double> sizes{0.0};   // per-vehicle data sizes

    void validate() const;  // throws std::invalid_argument on violation
};

// Discrete size distribution for the information-asymmetric variant.
struct AsymmetricParams {
    std::vector<double> size_support;
    std::vector<double> probs;

    void validate() const;
};

// N_RLY * I * s - alpha * s^2
double vehicle_utility(double size, double incentive, double alpha, std::size_t n_rly);

// Vehicle's best response to a fixed incentive: N_RLY * I / (2 alpha).
double vehicle_best_size(double incentive, double alpha, std::size_t n_rly);

// beta * ln(1+I) - I * sum(sizes)
double relay_utility(std::span<const double> sizes, double incentive, double beta);

// beta * ln(1+I) - sum_m p_m * N * I * s_m
double relay_utility_asymmetric(const AsymmetricParams& ap, std::size_t n, double incentive,
                                double beta);

struct EquilibriumResult {
    std::vector<double> s_star;
    double i_star = 0.0;
    double relay_utility_at_star = 0.0;
    bool relay_utility_positive = false;  // flagged, not an error, when false
    bool second_order_ok = false;         // numeric concavity at the point
};

// Joint point where every vehicle best-responds to I* and the relay
// best-responds to s*(I*): a one-dimensional fixed point in I, solved by
// bisection to 1e-10.
EquilibriumResult equilibrium(const GameParams& gp);

struct SweepRow {
    double beta = 0.0;
    double incentive = 0.0;
    std::vector<double> s_star;
    std::vector<double> vehicle_utilities;
    double relay_utility = 0.0;
    bool at_equilibrium = false;
};

// Tabulates best-response sizes and both utilities over (beta, I) grids;
// rows nearest each beta's equilibrium incentive are marked.
std::vector<SweepRow> sweep(const GameParams& gp, std::span<const double> beta_grid,
                            std::span<const double> i_grid);

}  // namespace vfl
