#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pdprog/cohort.hpp"
#include "pdprog/dimred.hpp"
#include "pdprog/forest.hpp"
#include "pdprog/mixture.hpp"

namespace pdprog {

struct RocCurve {
    std::vector<std::pair<double, double>> points;  // (fpr, tpr), (0,0) .. (1,1)
    std::vector<double> thresholds;                 // cutoff per point
    double auc = 0.0;
};

// Threshold sweep with grouped ties (equal scores move together); AUC by
// trapezoid. labels are 0/1 and both classes must be present.
RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels);

struct MacroAucResult {
    std::vector<double> per_class;  // NaN where undefined
    std::vector<bool> defined;
    double macro = 0.0;
};

// One-vs-rest AUC per class column; absent classes are excluded from the
// macro average with a warning.
MacroAucResult macro_ovr_auc(const Eigen::MatrixXd& probabilities,
                             const std::vector<std::string>& labels,
                             const std::vector<std::string>& classes);

// Seeded per-class shuffle, then one global round-robin over folds. Every
// class needs at least k members.
std::vector<int> stratified_kfold(const std::vector<std::string>& labels, int k, uint64_t seed);

double adjusted_rand_index(const std::vector<std::string>& a, const std::vector<std::string>& b);

struct CvReport {
    int k = 0;
    std::vector<int> fold_of;
    std::vector<std::string> classes;
    Eigen::MatrixXd pooled_probs;  // out-of-fold probabilities, n x classes
    std::vector<double> pooled_auc;
    std::vector<bool> pooled_auc_defined;
    double macro_auc = 0.0;
    std::vector<std::vector<double>> per_fold_auc;  // [fold][class], NaN when undefined
    std::vector<double> per_fold_macro;
    Eigen::MatrixXi confusion;  // rows = true class, cols = predicted
    std::vector<double> precision;
    std::vector<double> recall;
};

CvReport cross_validate(const Eigen::MatrixXd& features, const std::vector<std::string>& labels,
                        const ForestParams& params, int k, uint64_t seed);

struct WindowSpec {
    std::string name;
    std::vector<int> months;
};

// Column subset of m restricted to features observed in the window's months.
FeatureMatrix window_columns(const FeatureMatrix& m, const WindowSpec& window);

std::vector<std::pair<WindowSpec, CvReport>> windowed_experiment(
    const FeatureMatrix& m, const std::vector<WindowSpec>& windows,
    const std::vector<std::string>& labels, const ForestParams& params, int cv_k, uint64_t seed);

struct ReplicationReport {
    int n_patients = 0;
    std::vector<std::string> classes;
    std::vector<double> per_class_auc;  // NaN where undefined
    std::vector<bool> auc_defined;
    double macro_auc = 0.0;
    std::vector<double> class_balance;  // fraction of patients per class
    bool imbalance_flagged = false;     // any class below 10%
    std::vector<std::string> codes_shared;
    std::vector<std::string> codes_missing;  // training codes absent externally
    SubtypeAssignment assignment;
};

// Normalize an external cohort with the training norm_params, project it into
// the fitted space, assign subtypes with the trained GMM and score the trained
// forest against those GMM labels. Only PD-labeled patients participate.
ReplicationReport external_replication(const ProgressionSpace& space, const GmmModel& gmm,
                                       const ForestModel& forest, const VisitTable& external);

}  // namespace pdprog
