#pragma once

#include <cstdint>

#include "vfl/rng.hpp"

namespace vfl {

struct CapacityParams {
    double lambda_mb = 2.01;    // microblocks/s
    double ts = 10.0;           // upload time slot (s)
    double lambda_v = 16e-6;    // vehicles/m^2
    double r = 250.0;           // transmission range (m)
    double mu_d = 344.0;        // mean distance of out-of-range vehicles from RSU (m)
    double mu_v = 50.0 / 3.6;   // mean speed (m/s)
};

// Mean of a Poisson(m) count truncated to values <= floor(m):
// sum over l = 1..floor(m) of l * e^-m * m^l / l!. Empty sum (m < 1) is 0.
// Compensated summation below m = 500, gamma-function identity above.
double truncated_poisson_mean(double rate_product);

// Expected uploads through the ledger in one time slot.
double expected_with_blockchain(const CapacityParams& p);

struct WithoutBlockchain {
    double e_nv = 0.0;   // vehicles with the RSU already in range
    double e_nmv = 0.0;  // vehicles that can reach the RSU within the slot
    double e_nwb = 0.0;  // their sum
};

// Requires mu_d > r.
WithoutBlockchain expected_without_blockchain(const CapacityParams& p);

struct MonteCarloResult {
    double mean_nb = 0.0;
    double mean_nwb = 0.0;
    double std_nb = 0.0;   // sample standard deviation over runs
    double std_nwb = 0.0;
    std::size_t runs = 0;

    double se_nb() const;
    double se_nwb() const;
};

// Samples the three Poisson mechanisms directly (arrival gaps for the
// microblock and traveler processes, spatial thinning for placement when the
// expected count is small) and averages the truncated counts.
MonteCarloResult monte_carlo_capacity(const CapacityParams& p, std::size_t runs, Rng& rng);

struct CapacityReport {
    CapacityParams params;
    double e_nb = 0.0;
    double e_nv = 0.0;
    double e_nmv = 0.0;
    double e_nwb = 0.0;
    MonteCarloResult mc;
};

CapacityReport capacity_report(const CapacityParams& p, std::size_t mc_runs, Rng& rng);

}  // namespace vfl
