#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "vfl/capacity.hpp"
#include "vfl/econ.hpp"
#include "vfl/experiment.hpp"
#include "vfl/ledger.hpp"
#include "vfl/pipeline.hpp"

namespace {

int cmd_run(const std::string& config, const std::string& out_override,
            std::uint64_t seed_override, std::size_t reps_override, bool validate_only) {
    vfl::ExperimentSpec spec =
        config.empty() ? vfl::default_spec() : vfl::load_spec(config);
    if (!out_override.empty()) spec.out_dir = out_override;
    if (seed_override != 0) spec.seeds = {seed_override};
    if (reps_override != 0) spec.repetitions = reps_override;

    const auto findings = vfl::validate_spec(spec);
    if (!findings.empty()) {
        for (const auto& f : findings) {
            std::cerr << "invalid spec: " << f.field << ": " << f.message << "\n";
        }
        return 2;
    }
    if (validate_only) {
        std::cout << "spec ok (" << vfl::spec_hash(spec).substr(0, 16) << ")\n";
        return 0;
    }

    const auto outcome = vfl::run_experiment(spec);
    for (const auto& file : outcome.files) std::cout << "wrote " << file.string() << "\n";
    for (const auto& fail : outcome.failures) std::cerr << "failure: " << fail << "\n";
    return outcome.ok() ? 0 : 1;
}

int cmd_capacity(const vfl::CapacityParams& params, std::size_t runs, std::uint64_t seed,
                 bool as_json) {
    vfl::Rng rng(seed);
    const vfl::CapacityReport rep = vfl::capacity_report(params, runs, rng);
    if (as_json) {
        std::printf(
            "{\"lambda_mb\":%g,\"ts\":%g,\"lambda_v\":%g,\"r\":%g,\"mu_d\":%g,\"mu_v\":%g,"
            "\"e_nb\":%.10g,\"e_nv\":%.10g,\"e_nmv\":%.10g,\"e_nwb\":%.10g,"
            "\"mc_nb\":%.10g,\"mc_se_nb\":%.4g,\"mc_nwb\":%.10g,\"mc_se_nwb\":%.4g}\n",
            params.lambda_mb, params.ts, params.lambda_v, params.r, params.mu_d, params.mu_v,
            rep.e_nb, rep.e_nv, rep.e_nmv, rep.e_nwb, rep.mc.mean_nb, rep.mc.se_nb(),
            rep.mc.mean_nwb, rep.mc.se_nwb());
    } else {
        std::printf("lambda_v,lambda_mb,mu_d,ts,e_nb,e_nv,e_nmv,e_nwb,mc_nb,mc_se_nb,mc_nwb,mc_se_nwb\n");
        std::printf("%g,%g,%g,%g,%.10g,%.10g,%.10g,%.10g,%.10g,%.4g,%.10g,%.4g\n",
                    params.lambda_v, params.lambda_mb, params.mu_d, params.ts, rep.e_nb, rep.e_nv,
                    rep.e_nmv, rep.e_nwb, rep.mc.mean_nb, rep.mc.se_nb(), rep.mc.mean_nwb,
                    rep.mc.se_nwb());
    }
    return 0;
}

int cmd_econ(std::size_t n, std::size_t n_rly, double alpha, double beta, double i_max,
             double i_step) {
    vfl::GameParams gp;
    gp.n = n;
    gp.n_rly = n_rly;
    gp.alphas.assign(n, alpha);
    gp.sizes.assign(n, 0.0);
    gp.beta = beta;
    gp.validate();

    const vfl::EquilibriumResult eq = vfl::equilibrium(gp);
    std::fprintf(stderr, "equilibrium: I*=%.8g s*[0]=%.8g U_rly=%.8g%s\n", eq.i_star,
                 eq.s_star[0], eq.relay_utility_at_star,
                 eq.relay_utility_positive ? "" : " (flag: relay utility not positive)");

    std::vector<double> i_grid;
    for (double i = i_step; i <= i_max + 1e-12; i += i_step) i_grid.push_back(i);
    const std::vector<double> beta_grid{beta};
    std::printf("beta,I,s_star_0,u_0,u_rly,flag\n");
    for (const auto& row : vfl::sweep(gp, beta_grid, i_grid)) {
        std::printf("%.10g,%.10g,%.10g,%.10g,%.10g,%s\n", row.beta, row.incentive, row.s_star[0],
                    row.vehicle_utilities[0], row.relay_utility,
                    row.at_equilibrium ? "eq" : "-");
    }
    return 0;
}

int cmd_disseminate(const std::string& config, const std::string& consensus, std::uint64_t seed,
                    std::size_t reps) {
    vfl::ExperimentSpec spec = config.empty() ? vfl::default_spec() : vfl::load_spec(config);
    const auto findings = vfl::validate_spec(spec);
    if (!findings.empty()) {
        for (const auto& f : findings) {
            std::cerr << "invalid spec: " << f.field << ": " << f.message << "\n";
        }
        return 2;
    }
    const vfl::ConsensusKind kind =
        consensus == "pos" ? vfl::ConsensusKind::PoS : vfl::ConsensusKind::PoFL;

    std::printf("consensus,num_vehicles,malicious_pct,guard_mode,delivery_ratio,mean_hop_delay_s\n");
    for (std::size_t rep = 0; rep < reps; ++rep) {
        const std::uint64_t rep_seed = vfl::mix64(seed + rep);
        const vfl::ScenarioResult res = vfl::run_scenario(spec.base, rep_seed);
        const vfl::DisseminationResult d =
            vfl::run_dissemination(spec.base, res, kind, rep_seed);
        double mean_delay = 0.0;
        for (double v : d.metrics.per_hop_delay) mean_delay += v;
        if (!d.metrics.per_hop_delay.empty()) {
            mean_delay /= static_cast<double>(d.metrics.per_hop_delay.size());
        }
        std::printf("%s,%zu,%g,%s,%.10g,%.10g\n", consensus.c_str(), spec.base.sim.num_vehicles,
                    100.0 * spec.base.adversary.malicious_fraction,
                    vfl::guard_mode_name(spec.base.guard_mode), d.metrics.delivery_ratio,
                    mean_delay);
    }
    return 0;
}

int cmd_ledger_verify(const std::string& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        std::cerr << "cannot open " << file << "\n";
        return 2;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    vfl::LedgerCopy ledger;
    try {
        ledger = vfl::load_ledger(ss.str());
    } catch (const std::exception& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    }
    const vfl::VerifyReport rep = vfl::verify_chain(ledger);
    for (const auto& f : rep.findings) {
        std::printf("FAIL %s: %s\n", f.block.c_str(), f.problem.c_str());
    }
    std::printf("%s: %zu keyblocks, %zu microblocks, %zu message blocks: %s\n", file.c_str(),
                ledger.keyblocks.size(), ledger.microblock_count(), ledger.message_chain.size(),
                rep.pass ? "OK" : "INVALID");
    return rep.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vflsim: vehicular federated-learning and relay-consensus simulator"};
    app.require_subcommand(1);

    // run
    std::string run_config, run_out;
    std::uint64_t run_seed = 0;
    std::size_t run_reps = 0;
    bool run_validate = false;
    auto* run = app.add_subcommand("run", "run an experiment spec end to end");
    run->add_option("--config", run_config, "scenario JSON file (defaults to built-ins)");
    run->add_option("--out", run_out, "output directory override");
    run->add_option("--seed", run_seed, "single-seed override");
    run->add_option("--reps", run_reps, "repetition count override");
    run->add_flag("--validate-only", run_validate, "validate the spec and exit");

    // capacity
    vfl::CapacityParams cap;
    double cap_lambda_v_km2 = 16.0;
    std::size_t cap_runs = 100000;
    std::uint64_t cap_seed = 1;
    bool cap_json = false;
    auto* capacity = app.add_subcommand("capacity", "closed-form and Monte-Carlo upload capacity");
    capacity->add_option("--lambda-mb", cap.lambda_mb, "microblock arrival rate (1/s)");
    capacity->add_option("--ts", cap.ts, "upload time slot (s)");
    capacity->add_option("--lambda-v-km2", cap_lambda_v_km2, "vehicle density (1/km^2)");
    capacity->add_option("--r", cap.r, "transmission range (m)");
    capacity->add_option("--mu-d", cap.mu_d, "mean distance from RSU (m)");
    capacity->add_option("--mu-v", cap.mu_v, "mean speed (m/s)");
    capacity->add_option("--runs", cap_runs, "Monte-Carlo runs");
    capacity->add_option("--seed", cap_seed, "RNG seed");
    capacity->add_flag("--json", cap_json, "JSON output");

    // econ
    std::size_t econ_n = 200, econ_nrly = 2;
    double econ_alpha = 5e-4, econ_beta = 0.9e7, econ_imax = 20.0, econ_istep = 0.5;
    auto* econ = app.add_subcommand("econ", "Stackelberg incentive sweep and equilibrium");
    econ->add_option("--n", econ_n, "number of FL vehicles");
    econ->add_option("--n-rly", econ_nrly, "number of relays");
    econ->add_option("--alpha", econ_alpha, "cost coefficient (same for all vehicles)");
    econ->add_option("--beta", econ_beta, "originator compensation scale");
    econ->add_option("--i-max", econ_imax, "incentive sweep upper bound");
    econ->add_option("--i-step", econ_istep, "incentive sweep step");

    // disseminate
    std::string diss_config, diss_consensus = "pofl";
    std::uint64_t diss_seed = 1;
    std::size_t diss_reps = 1;
    auto* diss = app.add_subcommand("disseminate", "train, seal and run one incident dissemination");
    diss->add_option("--config", diss_config, "scenario JSON file");
    diss->add_option("--consensus", diss_consensus, "pofl or pos")
        ->check(CLI::IsMember({"pofl", "pos"}));
    diss->add_option("--seed", diss_seed, "base RNG seed");
    diss->add_option("--reps", diss_reps, "repetitions");

    // ledger verify
    auto* ledger = app.add_subcommand("ledger", "ledger file utilities");
    std::string ledger_file;
    auto* verify = ledger->add_subcommand("verify", "verify hash links and invariants");
    verify->add_option("file", ledger_file, "ledger dump file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(run_config, run_out, run_seed, run_reps, run_validate);
        if (*capacity) {
            cap.lambda_v = cap_lambda_v_km2 * 1e-6;
            return cmd_capacity(cap, cap_runs, cap_seed, cap_json);
        }
        if (*econ) return cmd_econ(econ_n, econ_nrly, econ_alpha, econ_beta, econ_imax, econ_istep);
        if (*diss) return cmd_disseminate(diss_config, diss_consensus, diss_seed, diss_reps);
        if (*ledger && *verify) return cmd_ledger_verify(ledger_file);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
