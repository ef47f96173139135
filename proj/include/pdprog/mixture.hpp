#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pdprog/common.hpp"

namespace pdprog {

struct GmmOptions {
    int max_iter = 200;
    double tol = 1e-6;  // convergence on mean per-point log-likelihood gain
    uint64_t seed = 0;
    int n_init = 10;
    double reg_floor = 1e-6;  // added to covariance diagonals every M-step
};

struct GmmModel {
    int k = 0;
    int dim = 0;
    Eigen::VectorXd weights;                   // simplex, length k
    Eigen::MatrixXd means;                     // k x d
    std::vector<Eigen::MatrixXd> covariances;  // k SPD matrices (d x d)
    double log_likelihood = 0.0;
    int n_iter = 0;
    bool converged = false;
    // subtype_rank[c] = velocity rank of component c (0 = PDVec1 = slowest,
    // by ascending norm of the component mean).
    std::vector<int> subtype_rank;
    std::vector<double> ll_history;  // log-likelihood after every E-step
    double reg_floor = 1e-6;
};

struct ModelSelectionCandidate {
    int k = 0;
    double log_likelihood = 0.0;
    int n_params = 0;
    double bic = 0.0;
    bool failed = false;
    std::string error;
};

struct ModelSelectionReport {
    std::vector<ModelSelectionCandidate> candidates;
    int chosen_k = 0;
};

struct SubtypeAssignment {
    std::vector<std::string> patient_ids;
    std::vector<std::string> labels;   // "PDVec1".."PDVecK"
    Eigen::MatrixXd responsibilities;  // n x k, columns in subtype-rank order
};

// EM with full covariances; k-means++ seeding plus one k-means pass,
// best of n_init restarts by final log-likelihood.
GmmModel fit_gmm(const Eigen::MatrixXd& coords, int k, const GmmOptions& opt);

double log_likelihood(const GmmModel& model, const Eigen::MatrixXd& coords);

int gmm_n_params(int k, int d);
double bic_from(double log_lik, int n_params, int n);
double bic(const GmmModel& model, const Eigen::MatrixXd& coords);

// Fit every k in [k_min, k_max], pick the BIC minimizer.
std::pair<ModelSelectionReport, GmmModel> select_k(const Eigen::MatrixXd& coords, int k_min,
                                                   int k_max, const GmmOptions& opt);

// Posterior component memberships in original component order.
Eigen::MatrixXd responsibilities(const GmmModel& model, const Eigen::MatrixXd& coords);

SubtypeAssignment assign_subtypes(const GmmModel& model, const Eigen::MatrixXd& coords,
                                  const std::vector<std::string>& patient_ids);

std::string subtype_name(int rank);  // 0 -> "PDVec1"

}  // namespace pdprog
