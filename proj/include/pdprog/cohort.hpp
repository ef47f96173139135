#pragma once

#include <Eigen/Dense>

#include <array>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "pdprog/common.hpp"

namespace pdprog {

enum class CohortLabel { PD, Prodromal, HC, SWEDD };

CohortLabel cohort_label_from_string(const std::string& s);
std::string to_string(CohortLabel label);

struct VisitObservation {
    std::string patient_id;
    CohortLabel cohort_label = CohortLabel::PD;
    int visit_month = 0;  // schedule-aligned months since baseline, >= 0
    std::string assessment_code;
    double value = 0.0;
};

// Long-format visit data. Patient order is first appearance in the
// observation stream; schedule is strictly increasing and anchored at
// month 0 whenever non-empty.
struct VisitTable {
    std::vector<VisitObservation> observations;
    std::vector<int> schedule;
    std::vector<std::string> assessment_codes;

    std::vector<std::string> patient_ids() const;
    // One label per patient, aligned with patient_ids().
    std::vector<CohortLabel> patient_labels() const;
    void validate() const;
};

struct ScheduleConfig {
    std::vector<int> months{0, 12, 24, 36, 48};
    // Observed months snap to the nearest schedule point within this many
    // months; rows outside every window are dropped with a warning.
    int snap_window = 3;
};

enum class Normalization { raw, minmax, zscore };

std::string to_string(Normalization n);
Normalization normalization_from_string(const std::string& s);

struct NormParams {
    Normalization method = Normalization::raw;
    // (min,max) per feature for minmax, (mean,std) for zscore.
    std::vector<std::array<double, 2>> per_feature;
};

struct FeatureMatrix {
    std::vector<std::string> patient_ids;
    std::vector<std::string> feature_names;  // "code@month"
    Eigen::MatrixXd values;                  // patients x features
    Normalization normalization = Normalization::raw;
    NormParams norm_params;
};

std::string make_feature_name(const std::string& code, int month);
std::pair<std::string, int> split_feature_name(const std::string& name);

// CSV contract: header patient_id,cohort_label,visit_month,assessment_code,value
VisitTable parse_visits(std::istream& stream, const ScheduleConfig& schedule = {});

// Fill every (patient, schedule month, code) cell: LOCF within patient,
// then per-(code,month) cohort median computed from raw observations.
VisitTable impute(const VisitTable& table);

// One row per patient, columns "code@month" in schedule-major order.
FeatureMatrix vectorize(const VisitTable& table);

// Drop every code whose within-patient range is <= epsilon for all patients.
FeatureMatrix drop_static_features(const FeatureMatrix& m, double epsilon);

FeatureMatrix normalize(const FeatureMatrix& m, Normalization method);

// Re-apply stored parameters to a raw matrix with the same feature schema
// (held-out cohorts; minmax outputs may fall outside [0,1] here).
Eigen::MatrixXd apply_norm_params(const Eigen::MatrixXd& raw, const NormParams& params);

void write_feature_matrix_csv(std::ostream& os, const FeatureMatrix& m);

}  // namespace pdprog
