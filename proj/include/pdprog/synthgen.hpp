#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pdprog/cohort.hpp"

namespace pdprog {

// Planted progression groups. PDVec1..3 carry cohort label PD; HC is the
// healthy-control group with zero velocities.
inline const std::vector<std::string> kGroupNames = {"PDVec1", "PDVec2", "PDVec3", "HC"};

struct CohortSpec {
    int n_pdvec1 = 150;
    int n_pdvec2 = 150;
    int n_pdvec3 = 150;
    int n_hc = 100;

    std::vector<std::string> dimensions{"motor", "cognitive", "sleep"};

    // Per-group slope (units/month) and baseline level, one entry per dimension.
    // Faster progressors start worse at baseline, which is what makes
    // baseline-only prediction possible at all.
    std::map<std::string, std::vector<double>> velocity_means{
        {"PDVec1", {0.05, 0.015, 0.03}},
        {"PDVec2", {0.10, 0.030, 0.06}},
        {"PDVec3", {0.15, 0.045, 0.09}},
        {"HC", {0.0, 0.0, 0.0}},
    };
    std::map<std::string, std::vector<double>> baseline_means{
        {"PDVec1", {3.0, 2.6, 2.8}},
        {"PDVec2", {4.0, 3.2, 3.6}},
        {"PDVec3", {5.0, 3.8, 4.4}},
        {"HC", {2.0, 2.0, 2.0}},
    };

    double noise_std = 0.8;
    // Per-patient heterogeneity, proportional to noise_std so that noise_std=0
    // switches every random effect off: slope sd = noise_std*velocity_jitter_scale
    // (units/month), intercept sd = noise_std*baseline_jitter_scale (units).
    double velocity_jitter_scale = 0.02;
    double baseline_jitter_scale = 0.45;

    int codes_per_dimension = 5;
    std::vector<int> schedule{0, 12, 24, 36, 48};
    double missing_rate = 0.1;
    uint64_t seed = 42;

    void validate() const;
};

struct SyntheticCohort {
    VisitTable visits;
    // patient_id -> planted group, in patient order
    std::vector<std::pair<std::string, std::string>> truth;
};

SyntheticCohort generate_cohort(const CohortSpec& spec);

void write_visits_csv(std::ostream& os, const VisitTable& table);
void write_truth_csv(std::ostream& os, const SyntheticCohort& cohort);

}  // namespace pdprog
