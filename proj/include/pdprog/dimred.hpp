#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pdprog/cohort.hpp"

namespace pdprog {

enum class DimRedMethod { nmf, pca, ica };

std::string to_string(DimRedMethod m);
DimRedMethod dimred_method_from_string(const std::string& s);

struct DimRedFitReport {
    int iterations = 0;
    double final_objective = 0.0;
    bool converged = false;
    int best_restart = 0;
    // nmf: squared Frobenius objective after every iteration (entry 0 is the
    // initial value); ica: per-iteration unmixing change. Empty for pca.
    std::vector<double> objective_history;
};

// Low-rank progression space: values ~ patient_coords * loadings (+ column
// means for the centered methods).
struct ProgressionSpace {
    DimRedMethod method = DimRedMethod::nmf;
    int rank = 0;
    Eigen::MatrixXd patient_coords;  // n x rank
    Eigen::MatrixXd loadings;        // rank x p
    std::vector<double> explained_shares;      // per component, each in [0,1]
    std::vector<int> dimension_order;          // component indices, descending share
    std::vector<std::string> dimension_names;  // optional, per component
    std::vector<std::string> feature_names;
    NormParams norm_params;          // normalization of the fitting matrix
    Eigen::VectorXd column_means;    // pca/ica centering (size 0 for nmf)
    Eigen::MatrixXd projection;      // p x rank linear projector (pca/ica)
    DimRedFitReport fit_report;
};

struct NmfOptions {
    int rank = 3;
    int max_iter = 500;
    double tol = 1e-6;
    uint64_t seed = 0;
    int n_restarts = 5;
};

struct IcaOptions {
    int rank = 3;
    int max_iter = 500;
    double tol = 1e-6;
    uint64_t seed = 0;
};

// Lee-Seung multiplicative updates on the squared Frobenius objective,
// best of n_restarts random initializations.
ProgressionSpace fit_nmf(const FeatureMatrix& m, const NmfOptions& opt);

// Thin SVD of the centered matrix; deterministic sign convention (largest
// |loading| of each direction is positive).
ProgressionSpace fit_pca(const FeatureMatrix& m, int rank);

// PCA whitening to `rank` components followed by symmetric FastICA with the
// log-cosh contrast. Non-convergence sets the report flag, it is not an error.
ProgressionSpace fit_ica(const FeatureMatrix& m, const IcaOptions& opt);

// Map a matrix with the same feature schema (aligned by name) into the fitted
// space: linear projection for pca/ica, nonnegative least squares against the
// frozen loadings for nmf.
Eigen::MatrixXd project(const ProgressionSpace& space, const FeatureMatrix& m);

// Share of m's total variance captured by each component, clamped to [0,1].
std::vector<double> explained_variance(const ProgressionSpace& space, const FeatureMatrix& m);

// Label each component by the dominant assessment-code family in its loadings.
void name_dimensions(ProgressionSpace& space, const std::map<std::string, std::string>& code_families);

// Coordinate columns permuted into descending-share order.
Eigen::MatrixXd ordered_coords(const ProgressionSpace& space, const Eigen::MatrixXd& coords);

}  // namespace pdprog
