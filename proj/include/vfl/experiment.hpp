#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vfl/capacity.hpp"
#include "vfl/econ.hpp"
#include "vfl/pipeline.hpp"

namespace vfl {

struct CapacityExperiment {
    std::size_t mc_runs = 20000;
    std::vector<CapacityParams> rows;  // defaults to the shipped density table
};

struct EconExperiment {
    GameParams game;
    std::vector<double> beta_grid;
    std::vector<double> i_grid;
};

struct ExperimentSpec {
    std::string scenario = "default";
    ScenarioParams base;
    std::size_t repetitions = 1;
    std::vector<std::uint64_t> seeds{1};
    std::string out_dir = "out";

    // grids for the adversary / fleet sweeps
    std::vector<std::size_t> vehicle_grid;
    std::vector<double> malicious_grid;
    bool compare_guard_modes = false;
    ConsensusKind dissemination_consensus = ConsensusKind::PoFL;

    CapacityExperiment capacity;
    EconExperiment econ;
};

ExperimentSpec default_spec();

struct Finding {
    std::string field;
    std::string message;
};

// All invariant violations with field paths; empty iff the spec is runnable.
std::vector<Finding> validate_spec(const ExperimentSpec& spec);

// JSON round trip for scenario files.
ExperimentSpec load_spec(const std::filesystem::path& file);
ExperimentSpec parse_spec(const std::string& json_text);
std::string spec_to_json(const ExperimentSpec& spec);

// SHA-256 of the canonical JSON form; stamped into every report file.
std::string spec_hash(const ExperimentSpec& spec);

struct ExperimentOutcome {
    std::vector<std::filesystem::path> files;
    std::vector<std::string> failures;  // one entry per failed cell/repetition
    bool ok() const { return failures.empty(); }
};

// Runs the full pipeline over the spec's grids and writes the report CSVs
// (loss trajectory, final loss vs adversary, capacity, econ, dissemination).
// Outputs are a pure function of (spec, seeds).
ExperimentOutcome run_experiment(const ExperimentSpec& spec);

}  // namespace vfl
