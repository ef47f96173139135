#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pdprog/common.hpp"

namespace pdprog {

struct ForestParams {
    int n_trees = 500;
    int max_depth = 0;  // 0 = unlimited
    int min_samples_leaf = 1;
    int mtry = 0;  // 0 = ceil(sqrt(p))
    bool bootstrap = true;
    uint64_t seed = 0;
    // Optional per-class weights applied inside the Gini criterion (aligned
    // with the model's sorted class list). Empty = unweighted.
    std::vector<double> class_weights;
};

// CART node; leaves keep per-class sample counts, internal nodes split on
// feature < threshold (left) vs >= threshold (right).
struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> counts;
};

struct Tree {
    std::vector<TreeNode> nodes;  // node 0 is the root
};

struct ForestModel {
    std::vector<Tree> trees;
    std::vector<std::string> classes;        // sorted label list
    std::vector<std::string> feature_names;  // optional, empty or size p
    int n_features = 0;
    bool has_oob = false;
    double oob_error = 0.0;
    std::vector<double> importances;  // mean decrease in Gini, normalized to sum 1
    bool has_splits = false;
};

double gini(const std::vector<double>& counts);

ForestModel train_forest(const Eigen::MatrixXd& features, const std::vector<std::string>& labels,
                         const ForestParams& params,
                         const std::vector<std::string>& feature_names = {});

// Average of the leaf class-frequency vectors over all trees; rows sum to 1.
Eigen::MatrixXd predict_proba(const ForestModel& model, const Eigen::MatrixXd& features);

// Argmax class per row; ties resolve to the earliest class in model.classes.
std::vector<std::string> predict(const ForestModel& model, const Eigen::MatrixXd& features);

// Importances sorted descending (ties by feature index).
std::vector<std::pair<std::string, double>> feature_importance(const ForestModel& model);

}  // namespace pdprog
