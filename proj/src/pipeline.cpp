#include "vfl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace vfl {

namespace {

// rng stream ids within one scenario run
enum : std::uint64_t {
    kStreamInit = 1,
    kStreamCollect = 2,
    kStreamPoison = 3,
    kStreamGuard = 4,
    kStreamGlobalInit = 5,
    kStreamTrain = 6,
    kStreamReference = 7,
    kStreamDissemination = 8,
    kStreamReputation = 9,
};

std::uint64_t train_seed(std::uint64_t base, std::uint64_t k, std::uint64_t vehicle,
                         std::uint64_t stream) {
    return mix64(mix64(base ^ mix64(stream)) + (k << 32) + vehicle);
}

}  // namespace

std::size_t central_vehicle(const std::vector<VehicleState>& vehicles, const SimConfig& cfg) {
    const Vec2 center{cfg.area_width_m / 2.0, cfg.area_height_m / 2.0};
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
        const double d = distance(vehicles[i].position, center);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

ScenarioResult run_scenario(const ScenarioParams& params, std::uint64_t seed) {
    SimConfig cfg = params.sim;
    cfg.rng_seed = seed;
    const Rng base(seed);

    ScenarioResult result;
    result.rsu_ledger = LedgerCopy::with_genesis();

    // --- Stage 1: placement and dataset collection --------------------------
    Rng rng_init = base.derive(kStreamInit);
    result.vehicles = init_vehicles(cfg, params.adversary.malicious_fraction,
                                    params.adversary.selfish_fraction, rng_init);

    // The observed collection, and the counterfactual without acknowledgment
    // suppression. The latter plays the Central Authority's true sample; both
    // replay the same stream so they differ only in n_a.
    std::vector<VehicleState> clean_world = result.vehicles;
    for (auto& v : clean_world) v.is_selfish = false;
    {
        Rng rng_collect = base.derive(kStreamCollect);
        collect_datasets(cfg, result.vehicles, cfg.hello_rounds, rng_collect);
    }
    {
        Rng rng_collect = base.derive(kStreamCollect);
        collect_datasets(cfg, clean_world, cfg.hello_rounds, rng_collect);
    }

    std::vector<std::vector<DatasetRow>> clean_datasets(result.vehicles.size());
    for (std::size_t i = 0; i < clean_world.size(); ++i) {
        clean_datasets[i] = clean_world[i].dataset;
    }

    for (std::size_t i = 0; i < result.vehicles.size(); ++i) {
        if (result.vehicles[i].is_fl_participant &&
            result.vehicles[i].dataset.size() >= params.min_rows) {
            result.participants.push_back(i);
        }
    }
    if (result.participants.empty()) {
        throw std::runtime_error(
            "run_scenario: no FL participant collected enough rows; "
            "increase hello_rounds or lower min_rows");
    }

    // frozen standardization from the trusted sample
    std::vector<DatasetRow> trusted_rows;
    for (const auto& ds : clean_datasets) {
        trusted_rows.insert(trusted_rows.end(), ds.begin(), ds.end());
    }
    result.scaler = FeatureScaler::fit(trusted_rows);

    std::vector<std::array<double, kFeatureDim>> eval_x;
    std::vector<double> eval_y;
    for (const auto& row : trusted_rows) {
        eval_x.push_back(result.scaler.features(row));
        eval_y.push_back(result.scaler.target(row));
    }

    // --- adversary injection -------------------------------------------------
    // Malicious vehicles train on a poisoned copy but will submit the summary
    // of their clean dataset to the smart contract.
    std::vector<std::vector<DatasetRow>> training_data(result.vehicles.size());
    Rng rng_poison = base.derive(kStreamPoison);
    const int relabel_max =
        params.adversary.relabel ? static_cast<int>(result.scaler.label_max) : 0;
    for (std::size_t i : result.participants) {
        if (result.vehicles[i].is_malicious) {
            training_data[i] = poison_dataset(result.vehicles[i].dataset,
                                              params.adversary.poison_strength, relabel_max,
                                              rng_poison);
        } else {
            training_data[i] = result.vehicles[i].dataset;
        }
    }

    // --- guard detectors ------------------------------------------------------
    GuardDetectors detectors;
    Rng rng_guard = base.derive(kStreamGuard);
    const bool need_dataset =
        params.guard_mode == GuardMode::DatasetOnly || params.guard_mode == GuardMode::Both;
    const bool need_weights =
        params.guard_mode == GuardMode::WeightsOnly || params.guard_mode == GuardMode::Both;

    if (need_dataset) {
        std::vector<std::vector<double>> trusted_summaries;
        for (std::size_t i : result.participants) {
            trusted_summaries.push_back(dataset_summary(clean_datasets[i]));
        }
        auto forest = fit_isolation_forest(trusted_summaries, params.guard.num_trees,
                                           params.guard.subsample_size, rng_guard);
        calibrate_threshold(forest, trusted_summaries, params.guard.threshold_percentile);
        detectors.dataset_forest = std::move(forest);
    }

    // --- iterations ----------------------------------------------------------
    Rng rng_global = base.derive(kStreamGlobalInit);
    result.global_model = init_weights(params.arch, rng_global);
    bool have_global = false;

    for (std::size_t k = 1; k <= params.k_max; ++k) {
        // trusted reference models for the weights detector
        if (need_weights && (k == 1 || params.guard.refit_weights_each_iteration)) {
            std::vector<std::vector<double>> ref_summaries;
            for (std::size_t i : result.participants) {
                TrainConfig ref_cfg = params.train;
                ref_cfg.rng_seed = train_seed(seed, k, i, kStreamReference);
                ModelWeights start;
                if (have_global) {
                    start = result.global_model;
                } else {
                    Rng r(train_seed(seed, 0, i, kStreamReference));
                    start = init_weights(params.arch, r);
                }
                const TrainResult ref = train_local(start, clean_datasets[i], result.scaler,
                                                    ref_cfg);
                ref_summaries.push_back(weight_summary(ref.weights));
            }
            Rng rng_forest = base.derive(kStreamGuard + 100 + k);
            auto forest = fit_isolation_forest(ref_summaries, params.guard.num_trees,
                                               params.guard.subsample_size, rng_forest);
            calibrate_threshold(forest, ref_summaries, params.guard.threshold_percentile);
            detectors.weights_forest = std::move(forest);
        }

        std::vector<ModelWeights> passed_models;
        std::vector<double> passed_losses;
        std::size_t rejected = 0;

        for (std::size_t i : result.participants) {
            TrainConfig cfg_i = params.train;
            cfg_i.rng_seed = train_seed(seed, k, i, kStreamTrain);
            ModelWeights start;
            if (have_global) {
                start = result.global_model;
            } else {
                Rng r(train_seed(seed, 0, i, kStreamTrain));
                start = init_weights(params.arch, r);
            }
            const TrainResult trained = train_local(start, training_data[i], result.scaler, cfg_i);

            const auto& submitted_rows =
                result.vehicles[i].is_malicious ? clean_datasets[i] : result.vehicles[i].dataset;
            const auto ds_sum = dataset_summary(submitted_rows);
            const auto w_sum = weight_summary(trained.weights);
            const GuardVerdict verdict =
                check_model(ds_sum, w_sum, params.guard_mode, detectors);

            result.guard_log.push_back({k, result.vehicles[i].pseudonym, params.guard_mode,
                                        verdict.dataset_score, verdict.weight_score,
                                        verdict.pass});

            Microblock mb;
            mb.prev_keyblock_hash = result.rsu_ledger.latest_keyblock().block_hash;
            mb.payload_hash = model_digest(trained.weights);
            mb.producer_pseudonym = result.vehicles[i].pseudonym;
            mb.iteration = k;
            mb.timestamp = static_cast<double>(k);
            mb.block_hash = mb.compute_hash();
            append_microblock(result.rsu_ledger, mb, verdict.pass);

            if (verdict.pass) {
                passed_models.push_back(trained.weights);
                passed_losses.push_back(trained.loss);
            } else {
                ++rejected;
            }
        }

        IterationRecord rec;
        rec.k = k;
        rec.passed = passed_models.size();
        rec.rejected = rejected;
        if (!passed_models.empty()) {
            result.global_model = fedavg(passed_models);
            have_global = true;
            rec.global_loss = global_loss(passed_losses);
            seal_keyblock(result.rsu_ledger, model_digest(result.global_model),
                          passed_models.size());
        } else {
            rec.global_loss = std::numeric_limits<double>::quiet_NaN();
        }
        rec.eval_mse = mse_loss(result.global_model, eval_x, eval_y);
        result.history.push_back(rec);
    }

    result.final_eval_mse = result.history.back().eval_mse;
    return result;
}

DisseminationResult run_dissemination(const ScenarioParams& params,
                                      const ScenarioResult& scenario, ConsensusKind kind,
                                      std::uint64_t seed) {
    SimConfig cfg = params.sim;
    cfg.rng_seed = seed;
    const Rng base(seed);

    ConsensusContext ctx = params.consensus;
    ctx.kind = kind;
    ctx.global_model = &scenario.global_model;
    ctx.scaler = &scenario.scaler;

    std::vector<double> reputations;
    if (kind == ConsensusKind::PoS) {
        Rng rng_rep = base.derive(kStreamReputation);
        reputations.resize(scenario.vehicles.size());
        for (auto& r : reputations) r = rng_rep.uniform(0.0, 100.0);
        ctx.reputations = &reputations;
    }

    Rng rng = base.derive(kStreamDissemination);
    const std::size_t org = central_vehicle(scenario.vehicles, cfg);
    return disseminate(cfg, scenario.vehicles, org, cfg.sim_duration_s, ctx, rng);
}

std::string guard_log_to_csv(const std::vector<GuardLogRow>& rows) {
    std::ostringstream os;
    os << "k,vehicle_pseudonym,mode,dataset_score,weight_score,verdict\n";
    char buf[64];
    for (const auto& r : rows) {
        os << r.k << ',' << to_hex(r.vehicle_pseudonym).substr(0, 16) << ','
           << guard_mode_name(r.mode) << ',';
        std::snprintf(buf, sizeof(buf), "%.6g,%.6g", r.dataset_score, r.weight_score);
        os << buf << ',' << (r.pass ? "pass" : "fail") << '\n';
    }
    return os.str();
}

}  // namespace vfl
