#include "vfl/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace vfl {

namespace {

using nlohmann::json;

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

GuardMode guard_mode_from_string(const std::string& s) {
    if (s == "none") return GuardMode::None;
    if (s == "dataset") return GuardMode::DatasetOnly;
    if (s == "weights") return GuardMode::WeightsOnly;
    if (s == "both") return GuardMode::Both;
    throw std::invalid_argument("unknown guard mode '" + s + "'");
}

ConsensusKind consensus_from_string(const std::string& s) {
    if (s == "pofl") return ConsensusKind::PoFL;
    if (s == "pos") return ConsensusKind::PoS;
    throw std::invalid_argument("unknown consensus kind '" + s + "'");
}

}  // namespace

ExperimentSpec default_spec() {
    ExperimentSpec spec;
    spec.scenario = "default";
    spec.base.sim = SimConfig{};
    spec.base.sim.hello_rounds = 300;
    spec.base.arch = ModelArch{};
    spec.base.train = TrainConfig{};
    spec.base.adversary = AdversaryConfig{};
    spec.base.guard_mode = GuardMode::None;
    spec.base.k_max = 100;
    spec.base.min_rows = 8;
    spec.vehicle_grid = {spec.base.sim.num_vehicles};
    spec.malicious_grid = {0.0};

    // density table: 16/32/48 vehicles per km^2 over the 2.5 km x 2.5 km area
    spec.capacity.mc_runs = 20000;
    const double mu_v = spec.base.sim.mean_speed_mps;
    spec.capacity.rows = {
        {2.01, 10.0, 16e-6, 250.0, 344.0, mu_v},
        {1.99, 10.0, 32e-6, 250.0, 298.0, mu_v},
        {0.98, 10.0, 48e-6, 250.0, 276.0, mu_v},
    };

    // incentive game sized so equilibrium data sizes land near 8000
    spec.econ.game.n = 200;
    spec.econ.game.n_rly = 2;
    spec.econ.game.alphas.assign(200, 5e-4);
    spec.econ.game.sizes.assign(200, 8000.0);
    spec.econ.game.beta = 0.9e7;
    spec.econ.game.i_incentive = 0.0;
    spec.econ.beta_grid = {0.9e7, 1.8e7};
    for (double i = 0.5; i <= 20.0 + 1e-9; i += 0.5) spec.econ.i_grid.push_back(i);
    return spec;
}

std::vector<Finding> validate_spec(const ExperimentSpec& spec) {
    std::vector<Finding> out;
    auto bad = [&out](std::string field, std::string msg) {
        out.push_back({std::move(field), std::move(msg)});
    };

    if (spec.scenario.empty()) bad("scenario", "must be nonempty");
    const SimConfig& s = spec.base.sim;
    if (!(s.area_width_m > 0)) bad("sim.area_width_m", "must be positive");
    if (!(s.area_height_m > 0)) bad("sim.area_height_m", "must be positive");
    if (s.num_vehicles == 0) bad("sim.num_vehicles", "must be >= 1");
    if (!(s.tx_range_m > 0)) bad("sim.tx_range_m", "must be positive");
    if (!(s.mean_speed_mps > 0)) bad("sim.mean_speed_mps", "must be positive");
    if (!(s.sim_duration_s > 0)) bad("sim.sim_duration_s", "must be positive");
    if (s.h_max < 1) bad("sim.h_max", "must be >= 1");
    if (!(s.wait_max_s > 0)) bad("sim.wait_max_s", "must be positive");
    if (!(s.msg_loss_prob >= 0.0 && s.msg_loss_prob <= 1.0)) {
        bad("sim.msg_loss_prob", "must be in [0,1]");
    }
    if (!(s.prop_delay_s >= 0)) bad("sim.prop_delay_s", "must be >= 0");
    if (!(s.designated_fraction >= 0.0 && s.designated_fraction <= 1.0)) {
        bad("sim.designated_fraction", "must be in [0,1]");
    }
    if (!(s.fl_participant_fraction > 0.0 && s.fl_participant_fraction <= 1.0)) {
        bad("sim.fl_participant_fraction", "must be in (0,1]");
    }
    if (s.hello_rounds == 0) bad("sim.hello_rounds", "must be >= 1");

    const ModelArch& a = spec.base.arch;
    if (a.input_dim < 1 || a.hidden_layers < 1 || a.hidden_width < 1 || a.output_dim < 1) {
        bad("arch", "all dimensions must be >= 1");
    }

    const TrainConfig& t = spec.base.train;
    if (!(t.learning_rate > 0)) bad("train.learning_rate", "must be positive");
    if (t.batch_size == 0) bad("train.batch_size", "must be >= 1");

    const AdversaryConfig& adv = spec.base.adversary;
    if (!(adv.malicious_fraction >= 0.0 && adv.malicious_fraction <= 1.0)) {
        bad("adversary.malicious_fraction", "must be in [0,1]");
    }
    if (!(adv.selfish_fraction >= 0.0 && adv.selfish_fraction <= 1.0)) {
        bad("adversary.selfish_fraction", "must be in [0,1]");
    }
    if (adv.malicious_fraction + adv.selfish_fraction > 1.0 + 1e-12) {
        bad("adversary", "malicious_fraction + selfish_fraction must be <= 1");
    }
    if (!(adv.poison_strength > 0)) bad("adversary.poison_strength", "must be positive");

    const GuardSettings& g = spec.base.guard;
    if (g.num_trees == 0) bad("guard.num_trees", "must be >= 1");
    if (g.subsample_size == 0) bad("guard.subsample_size", "must be >= 1");
    if (!(g.threshold_percentile > 0.0 && g.threshold_percentile <= 1.0)) {
        bad("guard.threshold_percentile", "must be in (0,1]");
    }

    const ConsensusContext& c = spec.base.consensus;
    if (!(c.timer_unit_s > 0)) bad("consensus.timer_unit_s", "must be positive");
    if (!(c.pofl_compute_charge_s >= 0)) bad("consensus.pofl_compute_charge_s", "must be >= 0");
    if (!(c.pos_lookup_cost_s >= 0)) bad("consensus.pos_lookup_cost_s", "must be >= 0");

    if (spec.base.k_max == 0) bad("k_max", "must be >= 1");
    if (spec.base.min_rows == 0) bad("min_rows", "must be >= 1");
    if (spec.repetitions == 0) bad("repetitions", "must be >= 1");
    if (spec.seeds.empty()) bad("seeds", "must list at least one seed");
    if (spec.out_dir.empty()) bad("out_dir", "must be nonempty");
    if (spec.vehicle_grid.empty()) bad("vehicle_grid", "must be nonempty");
    for (std::size_t n : spec.vehicle_grid) {
        if (n == 0) bad("vehicle_grid", "entries must be >= 1");
    }
    if (spec.malicious_grid.empty()) bad("malicious_grid", "must be nonempty");
    for (double m : spec.malicious_grid) {
        if (!(m >= 0.0 && m <= 1.0)) bad("malicious_grid", "entries must be in [0,1]");
        if (m + adv.selfish_fraction > 1.0 + 1e-12) {
            bad("malicious_grid", "entry plus selfish_fraction exceeds 1");
        }
    }

    if (spec.capacity.mc_runs == 0) bad("capacity.mc_runs", "must be >= 1");
    for (std::size_t i = 0; i < spec.capacity.rows.size(); ++i) {
        const CapacityParams& p = spec.capacity.rows[i];
        const std::string field = "capacity.rows[" + std::to_string(i) + "]";
        if (!(p.lambda_mb > 0) || !(p.ts > 0) || !(p.lambda_v > 0) || !(p.r > 0) ||
            !(p.mu_v > 0)) {
            bad(field, "rates, slot, range and speed must be positive");
        }
        if (!(p.mu_d > p.r)) bad(field, "mu_d must exceed r");
    }

    try {
        spec.econ.game.validate();
    } catch (const std::exception& e) {
        bad("econ.game", e.what());
    }
    if (spec.econ.beta_grid.empty()) bad("econ.beta_grid", "must be nonempty");
    if (spec.econ.i_grid.empty()) bad("econ.i_grid", "must be nonempty");
    return out;
}

// --- JSON mapping -----------------------------------------------------------

ExperimentSpec parse_spec(const std::string& json_text) {
    const json j = json::parse(json_text);
    ExperimentSpec spec = default_spec();

    spec.scenario = j.value("scenario", spec.scenario);
    if (j.contains("sim")) {
        const json& js = j["sim"];
        SimConfig& s = spec.base.sim;
        s.area_width_m = js.value("area_width_m", s.area_width_m);
        s.area_height_m = js.value("area_height_m", s.area_height_m);
        s.num_vehicles = js.value("num_vehicles", s.num_vehicles);
        s.tx_range_m = js.value("tx_range_m", s.tx_range_m);
        s.mean_speed_mps = js.value("mean_speed_mps", s.mean_speed_mps);
        s.sim_duration_s = js.value("sim_duration_s", s.sim_duration_s);
        s.h_max = js.value("h_max", s.h_max);
        s.wait_max_s = js.value("wait_max_s", s.wait_max_s);
        s.msg_loss_prob = js.value("msg_loss_prob", s.msg_loss_prob);
        s.rng_seed = js.value("rng_seed", s.rng_seed);
        s.prop_delay_s = js.value("prop_delay_s", s.prop_delay_s);
        s.designated_fraction = js.value("designated_fraction", s.designated_fraction);
        s.fl_participant_fraction =
            js.value("fl_participant_fraction", s.fl_participant_fraction);
        s.hello_rounds = js.value("hello_rounds", s.hello_rounds);
    }
    if (j.contains("arch")) {
        const json& ja = j["arch"];
        ModelArch& a = spec.base.arch;
        a.input_dim = ja.value("input_dim", a.input_dim);
        a.hidden_layers = ja.value("hidden_layers", a.hidden_layers);
        a.hidden_width = ja.value("hidden_width", a.hidden_width);
        a.output_dim = ja.value("output_dim", a.output_dim);
    }
    if (j.contains("train")) {
        const json& jt = j["train"];
        TrainConfig& t = spec.base.train;
        t.epochs = jt.value("epochs", t.epochs);
        t.learning_rate = jt.value("learning_rate", t.learning_rate);
        t.batch_size = jt.value("batch_size", t.batch_size);
        t.rng_seed = jt.value("rng_seed", t.rng_seed);
    }
    if (j.contains("adversary")) {
        const json& ja = j["adversary"];
        AdversaryConfig& adv = spec.base.adversary;
        adv.malicious_fraction = ja.value("malicious_fraction", adv.malicious_fraction);
        adv.selfish_fraction = ja.value("selfish_fraction", adv.selfish_fraction);
        adv.poison_strength = ja.value("poison_strength", adv.poison_strength);
        adv.relabel = ja.value("relabel", adv.relabel);
    }
    spec.base.guard_mode = guard_mode_from_string(
        j.value("guard_mode", std::string(guard_mode_name(spec.base.guard_mode))));
    if (j.contains("guard")) {
        const json& jg = j["guard"];
        GuardSettings& g = spec.base.guard;
        g.num_trees = jg.value("num_trees", g.num_trees);
        g.subsample_size = jg.value("subsample_size", g.subsample_size);
        g.threshold_percentile = jg.value("threshold_percentile", g.threshold_percentile);
        g.refit_weights_each_iteration =
            jg.value("refit_weights_each_iteration", g.refit_weights_each_iteration);
    }
    if (j.contains("consensus")) {
        const json& jc = j["consensus"];
        ConsensusContext& c = spec.base.consensus;
        c.timer_unit_s = jc.value("timer_unit_s", c.timer_unit_s);
        c.pofl_compute_charge_s = jc.value("pofl_compute_charge_s", c.pofl_compute_charge_s);
        c.pos_lookup_cost_s = jc.value("pos_lookup_cost_s", c.pos_lookup_cost_s);
    }
    spec.dissemination_consensus = consensus_from_string(
        j.value("dissemination_consensus",
                std::string(consensus_kind_name(spec.dissemination_consensus))));
    spec.base.k_max = j.value("k_max", spec.base.k_max);
    spec.base.min_rows = j.value("min_rows", spec.base.min_rows);
    spec.repetitions = j.value("repetitions", spec.repetitions);
    if (j.contains("seeds")) spec.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    spec.out_dir = j.value("out_dir", spec.out_dir);
    if (j.contains("vehicle_grid")) {
        spec.vehicle_grid = j["vehicle_grid"].get<std::vector<std::size_t>>();
    }
    if (j.contains("malicious_grid")) {
        spec.malicious_grid = j["malicious_grid"].get<std::vector<double>>();
    }
    spec.compare_guard_modes = j.value("compare_guard_modes", spec.compare_guard_modes);

    if (j.contains("capacity")) {
        const json& jc = j["capacity"];
        spec.capacity.mc_runs = jc.value("mc_runs", spec.capacity.mc_runs);
        if (jc.contains("rows")) {
            spec.capacity.rows.clear();
            for (const json& row : jc["rows"]) {
                CapacityParams p;
                p.lambda_mb = row.value("lambda_mb", p.lambda_mb);
                p.ts = row.value("ts", p.ts);
                if (row.contains("lambda_v_per_km2")) {
                    p.lambda_v = row["lambda_v_per_km2"].get<double>() * 1e-6;
                } else {
                    p.lambda_v = row.value("lambda_v", p.lambda_v);
                }
                p.r = row.value("r", p.r);
                p.mu_d = row.value("mu_d", p.mu_d);
                p.mu_v = row.value("mu_v", p.mu_v);
                spec.capacity.rows.push_back(p);
            }
        }
    }
    if (j.contains("econ")) {
        const json& je = j["econ"];
        GameParams& g = spec.econ.game;
        g.n = je.value("n", g.n);
        g.n_rly = je.value("n_rly", g.n_rly);
        g.beta = je.value("beta", g.beta);
        g.i_incentive = je.value("i_incentive", g.i_incentive);
        if (je.contains("alpha")) {
            g.alphas.assign(g.n, je["alpha"].get<double>());
        } else if (je.contains("alphas")) {
            g.alphas = je["alphas"].get<std::vector<double>>();
        } else {
            g.alphas.assign(g.n, g.alphas.empty() ? 5e-4 : g.alphas.front());
        }
        if (je.contains("size")) {
            g.sizes.assign(g.n, je["size"].get<double>());
        } else if (je.contains("sizes")) {
            g.sizes = je["sizes"].get<std::vector<double>>();
        } else {
            g.sizes.assign(g.n, g.sizes.empty() ? 8000.0 : g.sizes.front());
        }
        if (je.contains("beta_grid")) spec.econ.beta_grid = je["beta_grid"].get<std::vector<double>>();
        if (je.contains("i_grid")) spec.econ.i_grid = je["i_grid"].get<std::vector<double>>();
    }
    return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open spec file " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_spec(ss.str());
}

std::string spec_to_json(const ExperimentSpec& spec) {
    json j;
    j["scenario"] = spec.scenario;
    const SimConfig& s = spec.base.sim;
    j["sim"] = {{"area_width_m", s.area_width_m},
                {"area_height_m", s.area_height_m},
                {"num_vehicles", s.num_vehicles},
                {"tx_range_m", s.tx_range_m},
                {"mean_speed_mps", s.mean_speed_mps},
                {"sim_duration_s", s.sim_duration_s},
                {"h_max", s.h_max},
                {"wait_max_s", s.wait_max_s},
                {"msg_loss_prob", s.msg_loss_prob},
                {"rng_seed", s.rng_seed},
                {"prop_delay_s", s.prop_delay_s},
                {"designated_fraction", s.designated_fraction},
                {"fl_participant_fraction", s.fl_participant_fraction},
                {"hello_rounds", s.hello_rounds}};
    const ModelArch& a = spec.base.arch;
    j["arch"] = {{"input_dim", a.input_dim},
                 {"hidden_layers", a.hidden_layers},
                 {"hidden_width", a.hidden_width},
                 {"output_dim", a.output_dim}};
    const TrainConfig& t = spec.base.train;
    j["train"] = {{"epochs", t.epochs},
                  {"learning_rate", t.learning_rate},
                  {"batch_size", t.batch_size},
                  {"rng_seed", t.rng_seed}};
    const AdversaryConfig& adv = spec.base.adversary;
    j["adversary"] = {{"malicious_fraction", adv.malicious_fraction},
                      {"selfish_fraction", adv.selfish_fraction},
                      {"poison_strength", adv.poison_strength},
                      {"relabel", adv.relabel}};
    j["guard_mode"] = guard_mode_name(spec.base.guard_mode);
    const GuardSettings& g = spec.base.guard;
    j["guard"] = {{"num_trees", g.num_trees},
                  {"subsample_size", g.subsample_size},
                  {"threshold_percentile", g.threshold_percentile},
                  {"refit_weights_each_iteration", g.refit_weights_each_iteration}};
    const ConsensusContext& c = spec.base.consensus;
    j["consensus"] = {{"timer_unit_s", c.timer_unit_s},
                      {"pofl_compute_charge_s", c.pofl_compute_charge_s},
                      {"pos_lookup_cost_s", c.pos_lookup_cost_s}};
    j["dissemination_consensus"] = consensus_kind_name(spec.dissemination_consensus);
    j["k_max"] = spec.base.k_max;
    j["min_rows"] = spec.base.min_rows;
    j["repetitions"] = spec.repetitions;
    j["seeds"] = spec.seeds;
    j["out_dir"] = spec.out_dir;
    j["vehicle_grid"] = spec.vehicle_grid;
    j["malicious_grid"] = spec.malicious_grid;
    j["compare_guard_modes"] = spec.compare_guard_modes;

    json cap_rows = json::array();
    for (const CapacityParams& p : spec.capacity.rows) {
        cap_rows.push_back({{"lambda_mb", p.lambda_mb},
                            {"ts", p.ts},
                            {"lambda_v", p.lambda_v},
                            {"r", p.r},
                            {"mu_d", p.mu_d},
                            {"mu_v", p.mu_v}});
    }
    j["capacity"] = {{"mc_runs", spec.capacity.mc_runs}, {"rows", cap_rows}};
    j["econ"] = {{"n", spec.econ.game.n},
                 {"n_rly", spec.econ.game.n_rly},
                 {"beta", spec.econ.game.beta},
                 {"i_incentive", spec.econ.game.i_incentive},
                 {"alphas", spec.econ.game.alphas},
                 {"sizes", spec.econ.game.sizes},
                 {"beta_grid", spec.econ.beta_grid},
                 {"i_grid", spec.econ.i_grid}};
    return j.dump(2);
}

std::string spec_hash(const ExperimentSpec& spec) {
    return to_hex(sha256(spec_to_json(spec)));
}

// --- runner -------------------------------------------------------------

namespace {

std::uint64_t effective_seed(const ExperimentSpec& spec, std::size_t rep) {
    if (rep < spec.seeds.size()) return spec.seeds[rep];
    return mix64(spec.seeds.back() + (rep - spec.seeds.size()) + 1);
}

std::uint64_t cell_seed(std::uint64_t rep_seed, std::size_t n_vehicles, double malicious,
                        GuardMode mode) {
    std::uint64_t h = mix64(rep_seed ^ 0xce11);
    h = mix64(h + n_vehicles);
    h = mix64(h + static_cast<std::uint64_t>(std::llround(malicious * 1e6)));
    h = mix64(h + static_cast<std::uint64_t>(mode));
    return h;
}

struct ReportFile {
    std::filesystem::path path;
    std::ostringstream body;
};

void write_file(const ReportFile& f) {
    std::ofstream out(f.path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + f.path.string());
    out << f.body.str();
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentSpec& spec) {
    const auto findings = validate_spec(spec);
    if (!findings.empty()) {
        ExperimentOutcome out;
        for (const auto& f : findings) out.failures.push_back(f.field + ": " + f.message);
        return out;
    }

    std::filesystem::create_directories(spec.out_dir);
    const std::string hash = spec_hash(spec);
    std::ostringstream seeds_txt;
    for (std::size_t i = 0; i < spec.repetitions; ++i) {
        if (i) seeds_txt << ' ';
        seeds_txt << effective_seed(spec, i);
    }
    const std::string provenance =
        "# spec=" + hash.substr(0, 16) + " seeds=" + seeds_txt.str() + "\n";

    ExperimentOutcome outcome;
    const std::filesystem::path dir(spec.out_dir);

    ReportFile traj{dir / "loss_trajectory.csv", {}};
    traj.body << provenance << "k,global_loss\n";
    ReportFile traj_full{dir / "loss_trajectory_full.csv", {}};
    traj_full.body << provenance
                   << "scenario,num_vehicles,malicious_pct,guard_mode,rep,seed,k,global_loss,"
                      "eval_mse\n";
    ReportFile final_loss{dir / "final_loss_vs_adversary.csv", {}};
    final_loss.body << provenance
                    << "scenario,num_vehicles,malicious_pct,selfish_pct,guard_mode,rep,seed,"
                       "final_eval_mse\n";
    ReportFile capacity_csv{dir / "capacity.csv", {}};
    capacity_csv.body << provenance
                      << "lambda_v,lambda_mb,mu_d,ts,e_nb,e_nv,e_nmv,e_nwb,mc_nb,mc_se_nb,"
                         "mc_nwb,mc_se_nwb\n";
    ReportFile econ_csv{dir / "econ.csv", {}};
    ReportFile diss{dir / "dissemination.csv", {}};
    diss.body << provenance
              << "consensus,num_vehicles,malicious_pct,guard_mode,delivery_ratio,"
                 "mean_hop_delay_s\n";

    // base-scenario trajectory at the first seed (Fig. 4 analog, pinned format)
    try {
        const ScenarioResult base = run_scenario(spec.base, effective_seed(spec, 0));
        for (const auto& rec : base.history) {
            traj.body << rec.k << ',' << fmt_g(rec.global_loss) << '\n';
        }
    } catch (const std::exception& e) {
        outcome.failures.push_back(std::string("base scenario: ") + e.what());
    }

    std::vector<GuardMode> modes{spec.base.guard_mode};
    if (spec.compare_guard_modes) {
        modes = {GuardMode::None, GuardMode::DatasetOnly, GuardMode::WeightsOnly, GuardMode::Both};
    }

    for (std::size_t rep = 0; rep < spec.repetitions; ++rep) {
        const std::uint64_t rep_seed = effective_seed(spec, rep);
        for (std::size_t n : spec.vehicle_grid) {
            for (double mal : spec.malicious_grid) {
                for (GuardMode mode : modes) {
                    ScenarioParams params = spec.base;
                    params.sim.num_vehicles = n;
                    params.adversary.malicious_fraction = mal;
                    params.guard_mode = mode;
                    const std::uint64_t seed = cell_seed(rep_seed, n, mal, mode);
                    try {
                        const ScenarioResult res = run_scenario(params, seed);
                        for (const auto& rec : res.history) {
                            traj_full.body << spec.scenario << ',' << n << ','
                                           << fmt_g(100.0 * mal) << ',' << guard_mode_name(mode)
                                           << ',' << rep << ',' << seed << ',' << rec.k << ','
                                           << fmt_g(rec.global_loss) << ',' << fmt_g(rec.eval_mse)
                                           << '\n';
                        }
                        final_loss.body << spec.scenario << ',' << n << ',' << fmt_g(100.0 * mal)
                                        << ',' << fmt_g(100.0 * params.adversary.selfish_fraction)
                                        << ',' << guard_mode_name(mode) << ',' << rep << ','
                                        << seed << ',' << fmt_g(res.final_eval_mse) << '\n';

                        const ConsensusKind kind = spec.dissemination_consensus;
                        const DisseminationResult d = run_dissemination(params, res, kind, seed);
                        double mean_delay = std::numeric_limits<double>::quiet_NaN();
                        if (!d.metrics.per_hop_delay.empty()) {
                            double sum = 0.0;
                            for (double v : d.metrics.per_hop_delay) sum += v;
                            mean_delay =
                                sum / static_cast<double>(d.metrics.per_hop_delay.size());
                        }
                        diss.body << consensus_kind_name(kind) << ',' << n << ','
                                  << fmt_g(100.0 * mal) << ',' << guard_mode_name(mode) << ','
                                  << fmt_g(d.metrics.delivery_ratio) << ',' << fmt_g(mean_delay)
                                  << '\n';
                    } catch (const std::exception& e) {
                        std::ostringstream what;
                        what << "cell n=" << n << " malicious=" << mal << " mode="
                             << guard_mode_name(mode) << " rep=" << rep << ": " << e.what();
                        outcome.failures.push_back(what.str());
                    }
                }
            }
        }
    }

    // capacity analytics (Fig. 6 analog)
    try {
        Rng cap_rng(effective_seed(spec, 0));
        for (const CapacityParams& p : spec.capacity.rows) {
            Rng row_rng = cap_rng.derive(static_cast<std::uint64_t>(std::llround(p.lambda_v * 1e9)));
            const CapacityReport rep = capacity_report(p, spec.capacity.mc_runs, row_rng);
            capacity_csv.body << fmt_g(p.lambda_v) << ',' << fmt_g(p.lambda_mb) << ','
                              << fmt_g(p.mu_d) << ',' << fmt_g(p.ts) << ',' << fmt_g(rep.e_nb)
                              << ',' << fmt_g(rep.e_nv) << ',' << fmt_g(rep.e_nmv) << ','
                              << fmt_g(rep.e_nwb) << ',' << fmt_g(rep.mc.mean_nb) << ','
                              << fmt_g(rep.mc.se_nb()) << ',' << fmt_g(rep.mc.mean_nwb) << ','
                              << fmt_g(rep.mc.se_nwb()) << '\n';
        }
    } catch (const std::exception& e) {
        outcome.failures.push_back(std::string("capacity: ") + e.what());
    }

    // incentive analytics (Fig. 8 analog)
    try {
        econ_csv.body << provenance << "beta,I";
        for (std::size_t v = 0; v < spec.econ.game.n; ++v) econ_csv.body << ",s_star_" << v;
        for (std::size_t v = 0; v < spec.econ.game.n; ++v) econ_csv.body << ",u_" << v;
        econ_csv.body << ",u_rly,flag\n";
        const auto rows = sweep(spec.econ.game, spec.econ.beta_grid, spec.econ.i_grid);
        for (const SweepRow& row : rows) {
            econ_csv.body << fmt_g(row.beta) << ',' << fmt_g(row.incentive);
            for (double s : row.s_star) econ_csv.body << ',' << fmt_g(s);
            for (double u : row.vehicle_utilities) econ_csv.body << ',' << fmt_g(u);
            econ_csv.body << ',' << fmt_g(row.relay_utility) << ','
                          << (row.at_equilibrium ? "eq" : "-") << '\n';
        }
    } catch (const std::exception& e) {
        outcome.failures.push_back(std::string("econ: ") + e.what());
    }

    for (ReportFile* f : {&traj, &traj_full, &final_loss, &capacity_csv, &econ_csv, &diss}) {
        write_file(*f);
        outcome.files.push_back(f->path);
    }
    return outcome;
}

}  // namespace vfl
