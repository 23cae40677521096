#include "vfl/econ.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace vfl {

void GameParams::validate() const {
    if (n == 0) throw std::invalid_argument("GameParams: n must be positive");
    if (n_rly == 0) throw std::invalid_argument("GameParams: n_rly must be positive");
    if (alphas.size() != n) throw std::invalid_argument("GameParams: alphas size != n");
    if (sizes.size() != n) throw std::invalid_argument("GameParams: sizes size != n");
    for (double a : alphas) {
        if (!(a > 0.0)) throw std::invalid_argument("GameParams: alphas must be positive");
    }
    for (double s : sizes) {
        if (!(s >= 0.0)) throw std::invalid_argument("GameParams: sizes must be nonnegative");
    }
    if (!(beta > 0.0)) throw std::invalid_argument("GameParams: beta must be positive");
    if (!(i_incentive >= 0.0)) throw std::invalid_argument("GameParams: incentive must be >= 0");
}

void AsymmetricParams::validate() const {
    if (size_support.empty() || size_support.size() != probs.size()) {
        throw std::invalid_argument("AsymmetricParams: support/probs length mismatch");
    }
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) throw std::invalid_argument("AsymmetricParams: negative probability");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw std::invalid_argument("AsymmetricParams: probabilities must sum to 1");
    }
}

double vehicle_utility(double size, double incentive, double alpha, std::size_t n_rly) {
    if (!(alpha > 0.0)) throw std::invalid_argument("vehicle_utility: alpha must be positive");
    return static_cast<double>(n_rly) * incentive * size - alpha * size * size;
}

double vehicle_best_size(double incentive, double alpha, std::size_t n_rly) {
    if (!(alpha > 0.0)) throw std::invalid_argument("vehicle_best_size: alpha must be positive");
    return static_cast<double>(n_rly) * incentive / (2.0 * alpha);
}

double relay_utility(std::span<const double> sizes, double incentive, double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("relay_utility: beta must be positive");
    if (!(incentive >= 0.0)) throw std::invalid_argument("relay_utility: incentive must be >= 0");
    double total_size = 0.0;
    for (double s : sizes) total_size += s;
    return beta * std::log1p(incentive) - incentive * total_size;
}

double relay_utility_asymmetric(const AsymmetricParams& ap, std::size_t n, double incentive,
                                double beta) {
    ap.validate();
    double expected_payment = 0.0;
    for (std::size_t m = 0; m < ap.size_support.size(); ++m) {
        expected_payment += ap.probs[m] * static_cast<double>(n) * incentive * ap.size_support[m];
    }
    return beta * std::log1p(incentive) - expected_payment;
}

namespace {

std::vector<double> best_response_sizes(const GameParams& gp, double incentive) {
    std::vector<double> s(gp.n);
    for (std::size_t i = 0; i < gp.n; ++i) {
        s[i] = vehicle_best_size(incentive, gp.alphas[i], gp.n_rly);
    }
    return s;
}

double relay_best_incentive(double total_size, double beta) {
    if (total_size <= 0.0) return std::numeric_limits<double>::infinity();
    return std::max(0.0, beta / total_size - 1.0);
}

}  // namespace

EquilibriumResult equilibrium(const GameParams& gp) {
    gp.validate();

    // s_i*(I) = n_rly I / (2 a_i), so total size is c * I with
    double c = 0.0;
    for (double a : gp.alphas) c += static_cast<double>(gp.n_rly) / (2.0 * a);

    // residual I - BR_rly(s*(I)); strictly increasing in I
    auto residual = [&](double i_val) {
        return i_val - relay_best_incentive(c * i_val, gp.beta);
    };

    double lo = 1e-18;
    double hi = 1.0;
    while (residual(hi) < 0.0) {
        hi *= 2.0;
        if (hi > 1e18) throw std::runtime_error("equilibrium: bisection bracket failed");
    }
    while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        (residual(mid) < 0.0 ? lo : hi) = mid;
    }
    const double i_star = 0.5 * (lo + hi);

    EquilibriumResult res;
    res.i_star = i_star;
    res.s_star = best_response_sizes(gp, i_star);
    res.relay_utility_at_star = relay_utility(res.s_star, i_star, gp.beta);
    res.relay_utility_positive = res.relay_utility_at_star > 0.0;

    // numeric second differences at the point (Theorems restated as checks)
    const double hs = std::max(1e-6, 1e-6 * std::abs(res.s_star[0]));
    const double hi_step = std::max(1e-6, 1e-6 * std::abs(i_star));
    auto ui = [&](double s) { return vehicle_utility(s, i_star, gp.alphas[0], gp.n_rly); };
    auto ur = [&](double i_val) { return relay_utility(res.s_star, i_val, gp.beta); };
    const double d2_ui = ui(res.s_star[0] + hs) - 2.0 * ui(res.s_star[0]) + ui(res.s_star[0] - hs);
    const double d2_ur = ur(i_star + hi_step) - 2.0 * ur(i_star) + ur(std::max(0.0, i_star - hi_step));
    res.second_order_ok = d2_ui < 0.0 && d2_ur < 0.0;
    return res;
}

std::vector<SweepRow> sweep(const GameParams& gp, std::span<const double> beta_grid,
                            std::span<const double> i_grid) {
    std::vector<SweepRow> rows;
    rows.reserve(beta_grid.size() * i_grid.size());
    for (double beta : beta_grid) {
        GameParams local = gp;
        local.beta = beta;
        const EquilibriumResult eq = equilibrium(local);

        // mark the grid row nearest the equilibrium incentive
        std::size_t eq_idx = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < i_grid.size(); ++j) {
            const double d = std::abs(i_grid[j] - eq.i_star);
            if (d < best) {
                best = d;
                eq_idx = j;
            }
        }

        for (std::size_t j = 0; j < i_grid.size(); ++j) {
            SweepRow row;
            row.beta = beta;
            row.incentive = i_grid[j];
            row.s_star = best_response_sizes(local, i_grid[j]);
            row.vehicle_utilities.resize(gp.n);
            for (std::size_t v = 0; v < gp.n; ++v) {
                row.vehicle_utilities[v] =
                    vehicle_utility(row.s_star[v], i_grid[j], gp.alphas[v], gp.n_rly);
            }
            row.relay_utility = relay_utility(row.s_star, i_grid[j], beta);
            row.at_equilibrium = j == eq_idx;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

}  // namespace vfl
