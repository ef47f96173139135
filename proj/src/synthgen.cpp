#include "pdprog/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

namespace pdprog {

namespace {

CohortLabel label_for_group(const std::string& group) {
    return group == "HC" ? CohortLabel::HC : CohortLabel::PD;
}

}  // namespace

void CohortSpec::validate() const {
    if (n_pdvec1 < 0 || n_pdvec2 < 0 || n_pdvec3 < 0 || n_hc < 0)
        throw ValidationError("cohort spec: negative group count");
    if (n_pdvec1 + n_pdvec2 + n_pdvec3 + n_hc == 0)
        throw ValidationError("degenerate input: cohort spec has zero patients");
    if (dimensions.empty()) throw ValidationError("cohort spec: no dimensions");
    if (codes_per_dimension < 1) throw ValidationError("cohort spec: codes_per_dimension must be >= 1");
    if (noise_std < 0) throw ValidationError("cohort spec: noise_std must be >= 0");
    if (velocity_jitter_scale < 0 || baseline_jitter_scale < 0)
        throw ValidationError("cohort spec: jitter scales must be >= 0");
    if (missing_rate < 0 || missing_rate >= 1)
        throw ValidationError("cohort spec: missing_rate must lie in [0,1)");
    if (schedule.empty() || schedule.front() != 0)
        throw ValidationError("cohort spec: schedule must start at month 0");
    for (size_t i = 1; i < schedule.size(); ++i)
        if (schedule[i] <= schedule[i - 1])
            throw ValidationError("cohort spec: schedule is not strictly increasing");

    for (const auto& g : kGroupNames) {
        auto v = velocity_means.find(g);
        auto b = baseline_means.find(g);
        if (v == velocity_means.end() || v->second.size() != dimensions.size())
            throw ValidationError("cohort spec: velocity_means for group " + g +
                                  " must have one entry per dimension");
        if (b == baseline_means.end() || b->second.size() != dimensions.size())
            throw ValidationError("cohort spec: baseline_means for group " + g +
                                  " must have one entry per dimension");
    }

    // Velocity ordering on the motor dimension (dimension 0 when unnamed).
    size_t motor = 0;
    for (size_t d = 0; d < dimensions.size(); ++d)
        if (dimensions[d] == "motor") motor = d;
    double v1 = velocity_means.at("PDVec1")[motor];
    double v2 = velocity_means.at("PDVec2")[motor];
    double v3 = velocity_means.at("PDVec3")[motor];
    if (!(v1 < v2 && v2 < v3))
        throw ValidationError("cohort spec: motor velocities must satisfy PDVec1 < PDVec2 < PDVec3");
    for (double v : velocity_means.at("HC"))
        if (v != 0.0) throw ValidationError("cohort spec: HC velocities must all be zero");
}

SyntheticCohort generate_cohort(const CohortSpec& spec) {
    spec.validate();

    const size_t n_dims = spec.dimensions.size();
    std::vector<std::string> codes;
    for (const auto& dim : spec.dimensions)
        for (int j = 1; j <= spec.codes_per_dimension; ++j)
            codes.push_back(dim + "_" + std::to_string(j));

    const int counts[4] = {spec.n_pdvec1, spec.n_pdvec2, spec.n_pdvec3, spec.n_hc};
    const int total = spec.n_pdvec1 + spec.n_pdvec2 + spec.n_pdvec3 + spec.n_hc;
    int id_width = 1;
    for (int t = total; t >= 10; t /= 10) ++id_width;
    id_width = std::max(id_width, 4);

    SyntheticCohort cohort;
    cohort.visits.assessment_codes = codes;
    cohort.truth.reserve(static_cast<size_t>(total));

    const double slope_sd = spec.noise_std * spec.velocity_jitter_scale;
    const double intercept_sd = spec.noise_std * spec.baseline_jitter_scale;

    std::normal_distribution<double> unit_normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit_uniform(0.0, 1.0);

    int patient_index = 0;
    for (int g = 0; g < 4; ++g) {
        const std::string& group = kGroupNames[static_cast<size_t>(g)];
        const auto& vel = spec.velocity_means.at(group);
        const auto& base = spec.baseline_means.at(group);
        for (int i = 0; i < counts[g]; ++i, ++patient_index) {
            std::string id = "P" + std::to_string(patient_index + 1);
            id.insert(1, static_cast<size_t>(id_width) - (id.size() - 1), '0');
            cohort.truth.emplace_back(id, group);

            auto rng = make_rng(spec.seed, static_cast<uint64_t>(patient_index) + 1);
            std::vector<double> intercept(n_dims), slope(n_dims);
            for (size_t d = 0; d < n_dims; ++d) {
                intercept[d] = base[d] + intercept_sd * unit_normal(rng);
                slope[d] = vel[d] + slope_sd * unit_normal(rng);
            }
            for (int month : spec.schedule) {
                for (size_t d = 0; d < n_dims; ++d) {
                    for (int j = 0; j < spec.codes_per_dimension; ++j) {
                        double value = intercept[d] + slope[d] * month +
                                       spec.noise_std * unit_normal(rng);
                        bool drop = unit_uniform(rng) < spec.missing_rate;
                        if (drop) continue;
                        cohort.visits.observations.push_back(
                            {id, label_for_group(group), month,
                             codes[d * static_cast<size_t>(spec.codes_per_dimension) +
                                   static_cast<size_t>(j)],
                             value});
                    }
                }
            }
        }
    }

    std::set<int> months;
    for (const auto& obs : cohort.visits.observations) months.insert(obs.visit_month);
    cohort.visits.schedule.assign(months.begin(), months.end());
    cohort.visits.validate();
    return cohort;
}

void write_visits_csv(std::ostream& os, const VisitTable& table) {
    os << "patient_id,cohort_label,visit_month,assessment_code,value\n";
    for (const auto& obs : table.observations) {
        os << obs.patient_id << ',' << to_string(obs.cohort_label) << ',' << obs.visit_month << ','
           << obs.assessment_code << ',' << format_double(obs.value) << '\n';
    }
}

void write_truth_csv(std::ostream& os, const SyntheticCohort& cohort) {
    os << "patient_id,group\n";
    for (const auto& [id, group] : cohort.truth) os << id << ',' << group << '\n';
}

}  // namespace pdprog
