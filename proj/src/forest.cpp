#include "pdprog/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

namespace pdprog {

double gini(const std::vector<double>& counts) {
    double total = 0.0;
    for (double c : counts) {
        if (c < 0.0) throw ValidationError("gini: negative count");
        total += c;
    }
    if (total <= 0.0) throw ValidationError("gini: all counts are zero");
    double sum_sq = 0.0;
    for (double c : counts) sum_sq += (c / total) * (c / total);
    return 1.0 - sum_sq;
}

namespace {

struct TrainContext {
    const Eigen::MatrixXd& x;
    const std::vector<int>& y;
    int n_classes = 0;
    int mtry = 0;
    int max_depth = 0;
    int min_samples_leaf = 1;
    const std::vector<double>& class_weights;  // size n_classes
    double root_size = 0.0;
    std::vector<double>* importance = nullptr;
};

double weighted_gini(const std::vector<double>& counts, const std::vector<double>& weights) {
    double total = 0.0, sum_sq = 0.0;
    for (size_t c = 0; c < counts.size(); ++c) total += counts[c] * weights[c];
    if (total <= 0.0) return 0.0;
    for (size_t c = 0; c < counts.size(); ++c) {
        double p = counts[c] * weights[c] / total;
        sum_sq += p * p;
    }
    return 1.0 - sum_sq;
}

struct BestSplit {
    double decrease = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

// Samples are indices into the training matrix, repeated per bootstrap
// multiplicity. Returns the node index.
int grow_node(TrainContext& ctx, Tree& tree, std::vector<int>& samples, int begin, int end,
              int depth, std::mt19937_64& rng) {
    const int node_index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    std::vector<double> counts(static_cast<size_t>(ctx.n_classes), 0.0);
    for (int i = begin; i < end; ++i) counts[static_cast<size_t>(ctx.y[static_cast<size_t>(samples[static_cast<size_t>(i)])])] += 1.0;
    tree.nodes[static_cast<size_t>(node_index)].counts = counts;

    const int n_node = end - begin;
    const double parent_gini = weighted_gini(counts, ctx.class_weights);
    bool depth_ok = ctx.max_depth <= 0 || depth < ctx.max_depth;
    if (parent_gini <= 0.0 || !depth_ok || n_node < 2 * ctx.min_samples_leaf) return node_index;

    // Sample mtry distinct candidate features.
    const int p = static_cast<int>(ctx.x.cols());
    std::vector<int> features(static_cast<size_t>(p));
    std::iota(features.begin(), features.end(), 0);
    for (int i = 0; i < ctx.mtry; ++i) {
        std::uniform_int_distribution<int> pick(i, p - 1);
        std::swap(features[static_cast<size_t>(i)], features[static_cast<size_t>(pick(rng))]);
    }

    BestSplit best;
    std::vector<std::pair<double, int>> ordered;  // (value, class)
    ordered.reserve(static_cast<size_t>(n_node));
    std::vector<double> left_counts(static_cast<size_t>(ctx.n_classes));

    for (int fi = 0; fi < ctx.mtry; ++fi) {
        const int f = features[static_cast<size_t>(fi)];
        ordered.clear();
        for (int i = begin; i < end; ++i) {
            int s = samples[static_cast<size_t>(i)];
            ordered.emplace_back(ctx.x(s, f), ctx.y[static_cast<size_t>(s)]);
        }
        std::sort(ordered.begin(), ordered.end());
        if (ordered.front().first == ordered.back().first) continue;  // constant feature

        std::fill(left_counts.begin(), left_counts.end(), 0.0);
        int n_left = 0;
        for (int i = 0; i + 1 < n_node; ++i) {
            left_counts[static_cast<size_t>(ordered[static_cast<size_t>(i)].second)] += 1.0;
            ++n_left;
            double v = ordered[static_cast<size_t>(i)].first;
            double v_next = ordered[static_cast<size_t>(i + 1)].first;
            if (v == v_next) continue;  // ties move together
            int n_right = n_node - n_left;
            if (n_left < ctx.min_samples_leaf || n_right < ctx.min_samples_leaf) continue;

            std::vector<double> right_counts(counts);
            for (size_t c = 0; c < right_counts.size(); ++c) right_counts[c] -= left_counts[c];
            double child_gini =
                (n_left * weighted_gini(left_counts, ctx.class_weights) +
                 n_right * weighted_gini(right_counts, ctx.class_weights)) /
                static_cast<double>(n_node);
            double decrease = parent_gini - child_gini;
            if (decrease <= 0.0) continue;

            double threshold = v + 0.5 * (v_next - v);
            if (threshold <= v) threshold = v_next;  // adjacent doubles

            bool better = decrease > best.decrease;
            if (!better && decrease == best.decrease && best.feature >= 0) {
                better = f < best.feature || (f == best.feature && threshold < best.threshold);
            }
            if (better) best = {decrease, f, threshold};
        }
    }

    if (best.feature < 0) return node_index;

    if (ctx.importance)
        (*ctx.importance)[static_cast<size_t>(best.feature)] +=
            (static_cast<double>(n_node) / ctx.root_size) * best.decrease;

    // Partition samples in place: left = feature < threshold.
    int mid = begin;
    for (int i = begin; i < end; ++i) {
        int s = samples[static_cast<size_t>(i)];
        if (ctx.x(s, best.feature) < best.threshold) {
            std::swap(samples[static_cast<size_t>(i)], samples[static_cast<size_t>(mid)]);
            ++mid;
        }
    }

    int left = grow_node(ctx, tree, samples, begin, mid, depth + 1, rng);
    int right = grow_node(ctx, tree, samples, mid, end, depth + 1, rng);
    auto& node = tree.nodes[static_cast<size_t>(node_index)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    return node_index;
}

const std::vector<double>& leaf_counts(const Tree& tree, const Eigen::MatrixXd& x, Eigen::Index row) {
    int node = 0;
    while (tree.nodes[static_cast<size_t>(node)].feature >= 0) {
        const auto& nd = tree.nodes[static_cast<size_t>(node)];
        node = x(row, nd.feature) < nd.threshold ? nd.left : nd.right;
    }
    return tree.nodes[static_cast<size_t>(node)].counts;
}

}  // namespace

ForestModel train_forest(const Eigen::MatrixXd& features, const std::vector<std::string>& labels,
                         const ForestParams& params, const std::vector<std::string>& feature_names) {
    const Eigen::Index n = features.rows();
    const Eigen::Index p = features.cols();
    if (static_cast<Eigen::Index>(labels.size()) != n)
        throw ValidationError("train_forest: labels do not align with feature rows");
    if (n < 1 || p < 1) throw ValidationError("train_forest: empty training data");
    if (!features.allFinite()) throw ValidationError("train_forest: non-finite feature value");
    if (params.n_trees < 1) throw ValidationError("train_forest: n_trees must be >= 1");
    if (params.min_samples_leaf < 1) throw ValidationError("train_forest: min_samples_leaf must be >= 1");
    if (!feature_names.empty() && static_cast<Eigen::Index>(feature_names.size()) != p)
        throw SchemaError("train_forest: feature_names do not match feature count");

    ForestModel model;
    model.n_features = static_cast<int>(p);
    model.feature_names = feature_names;
    std::set<std::string> class_set(labels.begin(), labels.end());
    model.classes.assign(class_set.begin(), class_set.end());
    if (model.classes.size() < 2)
        throw ValidationError("train_forest: need at least 2 distinct labels, got " +
                              std::to_string(model.classes.size()));

    std::unordered_map<std::string, int> class_idx;
    for (size_t c = 0; c < model.classes.size(); ++c)
        class_idx.emplace(model.classes[c], static_cast<int>(c));
    std::vector<int> y(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) y[i] = class_idx.at(labels[i]);

    int mtry = params.mtry;
    if (mtry == 0) mtry = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))));
    if (mtry < 1 || mtry > p)
        throw ValidationError("train_forest: mtry must lie in [1, " + std::to_string(p) + "]");

    std::vector<double> class_weights = params.class_weights;
    if (class_weights.empty()) class_weights.assign(model.classes.size(), 1.0);
    if (class_weights.size() != model.classes.size())
        throw ValidationError("train_forest: class_weights must have one entry per class");

    std::vector<double> importance(static_cast<size_t>(p), 0.0);
    // OOB vote accumulation: summed leaf-frequency vectors per sample.
    Eigen::MatrixXd oob_votes = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(model.classes.size()));
    std::vector<int> oob_count(static_cast<size_t>(n), 0);

    model.trees.resize(static_cast<size_t>(params.n_trees));
    for (int t = 0; t < params.n_trees; ++t) {
        auto rng = make_rng(params.seed, static_cast<uint64_t>(t));
        std::vector<int> samples;
        std::vector<char> in_bag(static_cast<size_t>(n), 0);
        if (params.bootstrap) {
            std::uniform_int_distribution<int> pick(0, static_cast<int>(n) - 1);
            samples.resize(static_cast<size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i) {
                int s = pick(rng);
                samples[static_cast<size_t>(i)] = s;
                in_bag[static_cast<size_t>(s)] = 1;
            }
        } else {
            samples.resize(static_cast<size_t>(n));
            std::iota(samples.begin(), samples.end(), 0);
            std::fill(in_bag.begin(), in_bag.end(), 1);
        }

        TrainContext ctx{features, y,      static_cast<int>(model.classes.size()),
                         mtry,     params.max_depth, params.min_samples_leaf,
                         class_weights};
        ctx.root_size = static_cast<double>(samples.size());
        ctx.importance = &importance;
        Tree& tree = model.trees[static_cast<size_t>(t)];
        grow_node(ctx, tree, samples, 0, static_cast<int>(samples.size()), 0, rng);

        if (params.bootstrap) {
            for (Eigen::Index i = 0; i < n; ++i) {
                if (in_bag[static_cast<size_t>(i)]) continue;
                const auto& counts = leaf_counts(tree, features, i);
                double total = std::accumulate(counts.begin(), counts.end(), 0.0);
                for (size_t c = 0; c < counts.size(); ++c)
                    oob_votes(i, static_cast<Eigen::Index>(c)) += counts[c] / total;
                ++oob_count[static_cast<size_t>(i)];
            }
        }
    }

    double total_importance = std::accumulate(importance.begin(), importance.end(), 0.0);
    model.has_splits = total_importance > 0.0;
    if (model.has_splits) {
        for (double& v : importance) v /= total_importance;
    } else {
        warn("train_forest: forest has no splits; importances reported as zeros");
    }
    model.importances = std::move(importance);

    if (params.bootstrap) {
        int evaluated = 0, errors = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (oob_count[static_cast<size_t>(i)] == 0) continue;
            ++evaluated;
            Eigen::Index arg = 0;
            oob_votes.row(i).maxCoeff(&arg);
            if (static_cast<int>(arg) != y[static_cast<size_t>(i)]) ++errors;
        }
        if (evaluated > 0) {
            model.has_oob = true;
            model.oob_error = static_cast<double>(errors) / static_cast<double>(evaluated);
        }
    }
    return model;
}

Eigen::MatrixXd predict_proba(const ForestModel& model, const Eigen::MatrixXd& features) {
    if (features.cols() != model.n_features)
        throw SchemaError("predict_proba: expected " + std::to_string(model.n_features) +
                          " features, got " + std::to_string(features.cols()));
    const Eigen::Index n = features.rows();
    const Eigen::Index n_classes = static_cast<Eigen::Index>(model.classes.size());
    Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(n, n_classes);
    for (const auto& tree : model.trees) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& counts = leaf_counts(tree, features, i);
            double total = std::accumulate(counts.begin(), counts.end(), 0.0);
            for (Eigen::Index c = 0; c < n_classes; ++c)
                probs(i, c) += counts[static_cast<size_t>(c)] / total;
        }
    }
    probs /= static_cast<double>(model.trees.size());
    return probs;
}

std::vector<std::string> predict(const ForestModel& model, const Eigen::MatrixXd& features) {
    Eigen::MatrixXd probs = predict_proba(model, features);
    std::vector<std::string> out(static_cast<size_t>(probs.rows()));
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        int best = 0;
        for (int c = 1; c < probs.cols(); ++c)
            if (probs(i, c) > probs(i, best)) best = c;
        out[static_cast<size_t>(i)] = model.classes[static_cast<size_t>(best)];
    }
    return out;
}

std::vector<std::pair<std::string, double>> feature_importance(const ForestModel& model) {
    std::vector<int> order(model.importances.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return model.importances[static_cast<size_t>(a)] > model.importances[static_cast<size_t>(b)];
    });
    std::vector<std::pair<std::string, double>> out;
    out.reserve(order.size());
    for (int j : order) {
        std::string name = model.feature_names.empty() ? "f" + std::to_string(j)
                                                       : model.feature_names[static_cast<size_t>(j)];
        out.emplace_back(name, model.importances[static_cast<size_t>(j)]);
    }
    return out;
}

}  // namespace pdprog
