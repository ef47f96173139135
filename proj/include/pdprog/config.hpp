#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "pdprog/cohort.hpp"
#include "pdprog/dimred.hpp"
#include "pdprog/eval.hpp"
#include "pdprog/forest.hpp"
#include "pdprog/synthgen.hpp"

namespace pdprog {

// Flat key-value configuration with section prefixes (gmm.k_max = 6).
// Every field has a default; unknown keys are fatal.
struct PipelineConfig {
    std::string input = "visits.csv";
    std::string out_dir = "out";
    uint64_t seed = 42;

    std::vector<int> schedule{0, 12, 24, 36, 48};
    int snap_window = 3;
    double drop_epsilon = 0.0;
    Normalization norm_method = Normalization::minmax;

    DimRedMethod dimred_method = DimRedMethod::nmf;
    int dimred_rank = 3;
    int dimred_max_iter = 500;
    double dimred_tol = 1e-6;
    int dimred_restarts = 5;

    int gmm_k_min = 1;
    int gmm_k_max = 6;
    int gmm_max_iter = 200;
    double gmm_tol = 1e-6;
    int gmm_n_init = 10;
    double gmm_reg_floor = 1e-6;
    bool gmm_use_2d = false;

    ForestParams forest;
    std::string forest_window = "baseline";
    int cv_k = 5;

    std::vector<WindowSpec> windows{
        {"baseline", {0}}, {"baseline_12m", {0, 12}}, {"baseline_24m", {0, 12, 24}}};

    // assessment code -> dimension family (motor/cognitive/sleep/...); codes
    // not listed here fall back to the prefix before '_' when one exists.
    std::map<std::string, std::string> code_families;

    CohortSpec synth;

    // Per-stage RNG streams derived from the single user seed.
    uint64_t dimred_seed() const;
    uint64_t gmm_seed() const;
    uint64_t forest_seed() const;
    uint64_t cv_seed() const;

    ScheduleConfig schedule_config() const { return {schedule, snap_window}; }
    // Family of an assessment code: explicit mapping first, then prefix rule.
    std::string family_of(const std::string& code) const;
};

PipelineConfig parse_config(std::istream& stream);
PipelineConfig load_config(const std::string& path);
void apply_override(PipelineConfig& cfg, const std::string& key, const std::string& value);

}  // namespace pdprog
