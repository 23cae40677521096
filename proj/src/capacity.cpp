#include "vfl/capacity.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vfl {

double truncated_poisson_mean(double rate_product) {
    if (!(rate_product >= 0.0)) {
        throw std::invalid_argument("truncated_poisson_mean: rate must be nonnegative");
    }
    const double floor_m = std::floor(rate_product);
    if (floor_m < 1.0) return 0.0;
    const auto limit = static_cast<std::size_t>(floor_m);

    if (rate_product <= 500.0) {
        // Kahan-compensated sum of l * p_l with p_l built by recurrence
        double term = std::exp(-rate_product);  // p_0
        double sum = 0.0, comp = 0.0;
        for (std::size_t l = 1; l <= limit; ++l) {
            term *= rate_product / static_cast<double>(l);
            const double y = static_cast<double>(l) * term - comp;
            const double t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        return sum;
    }
    // sum_{l=1}^{M} l p_l = m * P(Pois(m) <= M-1) = m * Q(M, m)
    return rate_product * boost::math::gamma_q(floor_m, rate_product);
}

double expected_with_blockchain(const CapacityParams& p) {
    return truncated_poisson_mean(p.lambda_mb * p.ts);
}

WithoutBlockchain expected_without_blockchain(const CapacityParams& p) {
    if (!(p.mu_d > p.r)) {
        throw std::invalid_argument("expected_without_blockchain: requires mu_d > r");
    }
    WithoutBlockchain out;
    out.e_nv = truncated_poisson_mean(p.lambda_v * std::numbers::pi * p.r * p.r);
    out.e_nmv = truncated_poisson_mean(p.ts * p.mu_v / (p.mu_d - p.r));
    out.e_nwb = out.e_nv + out.e_nmv;
    return out;
}

double MonteCarloResult::se_nb() const { return runs > 0 ? std_nb / std::sqrt(double(runs)) : 0.0; }
double MonteCarloResult::se_nwb() const {
    return runs > 0 ? std_nwb / std::sqrt(double(runs)) : 0.0;
}

namespace {

// arrivals of a Poisson process with the given rate over [0, horizon]
std::uint64_t count_arrivals(double rate, double horizon, Rng& rng) {
    if (!(rate > 0.0) || !(horizon > 0.0)) return 0;
    const double total = rate * horizon;
    if (total > 64.0) return rng.poisson(total);
    std::uint64_t n = 0;
    for (double t = rng.exponential(rate); t <= horizon; t += rng.exponential(rate)) ++n;
    return n;
}

// Poisson count of uniform points inside the disk of radius r, by thinning a
// square when cheap enough.
std::uint64_t count_in_disk(double lambda, double r, Rng& rng) {
    const double square_mean = lambda * 4.0 * r * r;
    if (square_mean > 0.0 && square_mean <= 4096.0) {
        const std::uint64_t m = rng.poisson(square_mean);
        std::uint64_t inside = 0;
        for (std::uint64_t i = 0; i < m; ++i) {
            const double x = rng.uniform(-r, r);
            const double y = rng.uniform(-r, r);
            if (x * x + y * y <= r * r) ++inside;
        }
        return inside;
    }
    return rng.poisson(lambda * std::numbers::pi * r * r);
}

}  // namespace

MonteCarloResult monte_carlo_capacity(const CapacityParams& p, std::size_t runs, Rng& rng) {
    if (runs == 0) throw std::invalid_argument("monte_carlo_capacity: runs must be >= 1");
    if (!(p.mu_d > p.r)) {
        throw std::invalid_argument("monte_carlo_capacity: requires mu_d > r");
    }
    const double m_b = p.lambda_mb * p.ts;
    const double m_v = p.lambda_v * std::numbers::pi * p.r * p.r;
    const double m_mv = p.ts * p.mu_v / (p.mu_d - p.r);
    const double cap_b = std::floor(m_b);
    const double cap_v = std::floor(m_v);
    const double cap_mv = std::floor(m_mv);

    double sum_b = 0.0, sumsq_b = 0.0, sum_wb = 0.0, sumsq_wb = 0.0;
    for (std::size_t i = 0; i < runs; ++i) {
        const auto k_b = static_cast<double>(count_arrivals(p.lambda_mb, p.ts, rng));
        const auto k_v = static_cast<double>(count_in_disk(p.lambda_v, p.r, rng));
        const auto k_mv =
            static_cast<double>(count_arrivals(p.mu_v / (p.mu_d - p.r), p.ts, rng));

        const double nb = (k_b >= 1.0 && k_b <= cap_b) ? k_b : 0.0;
        const double nv = (k_v >= 1.0 && k_v <= cap_v) ? k_v : 0.0;
        const double nmv = (k_mv >= 1.0 && k_mv <= cap_mv) ? k_mv : 0.0;
        const double nwb = nv + nmv;

        sum_b += nb;
        sumsq_b += nb * nb;
        sum_wb += nwb;
        sumsq_wb += nwb * nwb;
    }

    MonteCarloResult res;
    res.runs = runs;
    const double n = static_cast<double>(runs);
    res.mean_nb = sum_b / n;
    res.mean_nwb = sum_wb / n;
    if (runs > 1) {
        res.std_nb = std::sqrt(std::max(0.0, (sumsq_b - n * res.mean_nb * res.mean_nb) / (n - 1)));
        res.std_nwb =
            std::sqrt(std::max(0.0, (sumsq_wb - n * res.mean_nwb * res.mean_nwb) / (n - 1)));
    }
    return res;
}

CapacityReport capacity_report(const CapacityParams& p, std::size_t mc_runs, Rng& rng) {
    CapacityReport rep;
    rep.params = p;
    rep.e_nb = expected_with_blockchain(p);
    const auto wb = expected_without_blockchain(p);
    rep.e_nv = wb.e_nv;
    rep.e_nmv = wb.e_nmv;
    rep.e_nwb = wb.e_nwb;
    rep.mc = monte_carlo_capacity(p, mc_runs, rng);
    return rep;
}

}  // namespace vfl
