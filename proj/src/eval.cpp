#include "pdprog/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace pdprog {

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw ValidationError("roc_curve: scores and labels differ in length");
    long long n_pos = 0, n_neg = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) throw ValidationError("roc_curve: labels must be 0 or 1");
        (l == 1 ? n_pos : n_neg) += 1;
    }
    if (n_pos == 0 || n_neg == 0)
        throw ValidationError("roc_curve: both classes must be present");
    for (double s : scores)
        if (!std::isfinite(s)) throw ValidationError("roc_curve: non-finite score");

    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.emplace_back(0.0, 0.0);
    curve.thresholds.push_back(std::numeric_limits<double>::infinity());

    long long tp = 0, fp = 0;
    size_t i = 0;
    while (i < order.size()) {
        double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            (labels[order[i]] == 1 ? tp : fp) += 1;
            ++i;
        }
        curve.points.emplace_back(static_cast<double>(fp) / static_cast<double>(n_neg),
                                  static_cast<double>(tp) / static_cast<double>(n_pos));
        curve.thresholds.push_back(s);
    }

    double auc = 0.0;
    for (size_t j = 1; j < curve.points.size(); ++j) {
        auto [x0, y0] = curve.points[j - 1];
        auto [x1, y1] = curve.points[j];
        auc += (x1 - x0) * 0.5 * (y0 + y1);
    }
    curve.auc = auc;
    return curve;
}

MacroAucResult macro_ovr_auc(const Eigen::MatrixXd& probabilities,
                             const std::vector<std::string>& labels,
                             const std::vector<std::string>& classes) {
    if (static_cast<size_t>(probabilities.cols()) != classes.size())
        throw ValidationError("macro_ovr_auc: probability columns do not match class list");
    if (static_cast<size_t>(probabilities.rows()) != labels.size())
        throw ValidationError("macro_ovr_auc: probability rows do not match labels");
    std::set<std::string> present(labels.begin(), labels.end());
    if (present.size() < 2)
        throw ValidationError("macro_ovr_auc: need at least 2 classes present");

    MacroAucResult out;
    out.per_class.assign(classes.size(), std::numeric_limits<double>::quiet_NaN());
    out.defined.assign(classes.size(), false);
    double sum = 0.0;
    int defined = 0;
    for (size_t c = 0; c < classes.size(); ++c) {
        if (!present.count(classes[c])) {
            warn("macro_ovr_auc: class '" + classes[c] +
                 "' absent from labels; excluded from macro average");
            continue;
        }
        std::vector<double> scores(labels.size());
        std::vector<int> binary(labels.size());
        for (size_t i = 0; i < labels.size(); ++i) {
            scores[i] = probabilities(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
            binary[i] = labels[i] == classes[c] ? 1 : 0;
        }
        out.per_class[c] = roc_curve(scores, binary).auc;
        out.defined[c] = true;
        sum += out.per_class[c];
        ++defined;
    }
    out.macro = defined > 0 ? sum / defined : std::numeric_limits<double>::quiet_NaN();
    return out;
}

std::vector<int> stratified_kfold(const std::vector<std::string>& labels, int k, uint64_t seed) {
    if (k < 2) throw ValidationError("stratified_kfold: k must be >= 2 (no held-out data otherwise)");

    std::map<std::string, std::vector<size_t>> by_class;
    for (size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    for (const auto& [cls, members] : by_class) {
        if (static_cast<int>(members.size()) < k)
            throw ValidationError("stratified_kfold: class '" + cls + "' has " +
                                  std::to_string(members.size()) + " members, fewer than k=" +
                                  std::to_string(k));
    }

    auto rng = make_rng(seed, 0);
    std::vector<int> fold_of(labels.size(), -1);
    long long counter = 0;
    for (auto& [cls, members] : by_class) {
        std::shuffle(members.begin(), members.end(), rng);
        for (size_t idx : members) fold_of[idx] = static_cast<int>(counter++ % k);
    }
    return fold_of;
}

double adjusted_rand_index(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.size() != b.size())
        throw ValidationError("adjusted_rand_index: partitions differ in size");
    const double n = static_cast<double>(a.size());
    if (a.empty()) throw ValidationError("adjusted_rand_index: empty partitions");

    std::map<std::pair<std::string, std::string>, double> cell;
    std::map<std::string, double> row, col;
    for (size_t i = 0; i < a.size(); ++i) {
        cell[{a[i], b[i]}] += 1.0;
        row[a[i]] += 1.0;
        col[b[i]] += 1.0;
    }
    auto comb2 = [](double m) { return m * (m - 1.0) / 2.0; };
    double sum_cells = 0.0, sum_rows = 0.0, sum_cols = 0.0;
    for (const auto& [key, m] : cell) sum_cells += comb2(m);
    for (const auto& [key, m] : row) sum_rows += comb2(m);
    for (const auto& [key, m] : col) sum_cols += comb2(m);

    double expected = sum_rows * sum_cols / comb2(n);
    double maximum = 0.5 * (sum_rows + sum_cols);
    if (maximum == expected) return 1.0;  // both partitions trivial in the same way
    return (sum_cells - expected) / (maximum - expected);
}

CvReport cross_validate(const Eigen::MatrixXd& features, const std::vector<std::string>& labels,
                        const ForestParams& params, int k, uint64_t seed) {
    CvReport report;
    report.k = k;
    report.fold_of = stratified_kfold(labels, k, seed);

    std::set<std::string> class_set(labels.begin(), labels.end());
    report.classes.assign(class_set.begin(), class_set.end());
    const Eigen::Index n = features.rows();
    const size_t n_classes = report.classes.size();
    report.pooled_probs = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(n_classes));

    std::vector<std::string> pooled_pred(labels.size());
    for (int fold = 0; fold < k; ++fold) {
        std::vector<int> train_rows, test_rows;
        for (size_t i = 0; i < labels.size(); ++i)
            (report.fold_of[i] == fold ? test_rows : train_rows).push_back(static_cast<int>(i));

        Eigen::MatrixXd train_x(train_rows.size(), features.cols());
        std::vector<std::string> train_y(train_rows.size());
        for (size_t i = 0; i < train_rows.size(); ++i) {
            train_x.row(static_cast<Eigen::Index>(i)) = features.row(train_rows[i]);
            train_y[i] = labels[static_cast<size_t>(train_rows[i])];
        }
        Eigen::MatrixXd test_x(test_rows.size(), features.cols());
        for (size_t i = 0; i < test_rows.size(); ++i)
            test_x.row(static_cast<Eigen::Index>(i)) = features.row(test_rows[i]);

        ForestModel model;
        try {
            ForestParams fold_params = params;
            fold_params.seed = mix_seed(seed, static_cast<uint64_t>(fold) + 1);
            model = train_forest(train_x, train_y, fold_params);
        } catch (const Error&) {
            throw;  // rewrapped below with the fold index
        } catch (const std::exception& e) {
            throw NumericError("cross_validate fold " + std::to_string(fold) + ": " + e.what());
        }
        if (model.classes != report.classes)
            throw ValidationError("cross_validate fold " + std::to_string(fold) +
                                  ": training fold lost a class (stratification bug)");

        Eigen::MatrixXd probs = predict_proba(model, test_x);
        auto preds = predict(model, test_x);
        std::vector<double> fold_auc(n_classes, std::numeric_limits<double>::quiet_NaN());
        std::vector<std::string> fold_labels(test_rows.size());
        for (size_t i = 0; i < test_rows.size(); ++i) {
            report.pooled_probs.row(test_rows[i]) = probs.row(static_cast<Eigen::Index>(i));
            pooled_pred[static_cast<size_t>(test_rows[i])] = preds[i];
            fold_labels[i] = labels[static_cast<size_t>(test_rows[i])];
        }
        MacroAucResult fold_result = macro_ovr_auc(probs, fold_labels, report.classes);
        report.per_fold_auc.push_back(fold_result.per_class);
        report.per_fold_macro.push_back(fold_result.macro);
    }

    MacroAucResult pooled = macro_ovr_auc(report.pooled_probs, labels, report.classes);
    report.pooled_auc = pooled.per_class;
    report.pooled_auc_defined = pooled.defined;
    report.macro_auc = pooled.macro;

    std::unordered_map<std::string, int> class_idx;
    for (size_t c = 0; c < n_classes; ++c) class_idx.emplace(report.classes[c], static_cast<int>(c));
    report.confusion = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(n_classes),
                                             static_cast<Eigen::Index>(n_classes));
    for (size_t i = 0; i < labels.size(); ++i)
        report.confusion(class_idx.at(labels[i]), class_idx.at(pooled_pred[i])) += 1;

    report.precision.assign(n_classes, std::numeric_limits<double>::quiet_NaN());
    report.recall.assign(n_classes, std::numeric_limits<double>::quiet_NaN());
    for (size_t c = 0; c < n_classes; ++c) {
        auto ci = static_cast<Eigen::Index>(c);
        double col_sum = report.confusion.col(ci).sum();
        double row_sum = report.confusion.row(ci).sum();
        if (col_sum > 0) report.precision[c] = report.confusion(ci, ci) / col_sum;
        if (row_sum > 0) report.recall[c] = report.confusion(ci, ci) / row_sum;
    }
    return report;
}

FeatureMatrix window_columns(const FeatureMatrix& m, const WindowSpec& window) {
    std::unordered_set<int> months(window.months.begin(), window.months.end());
    FeatureMatrix out;
    out.patient_ids = m.patient_ids;
    out.normalization = m.normalization;
    out.norm_params.method = m.norm_params.method;
    std::vector<Eigen::Index> keep;
    for (size_t j = 0; j < m.feature_names.size(); ++j) {
        auto [code, month] = split_feature_name(m.feature_names[j]);
        if (months.count(month)) {
            keep.push_back(static_cast<Eigen::Index>(j));
            out.feature_names.push_back(m.feature_names[j]);
            if (!m.norm_params.per_feature.empty())
                out.norm_params.per_feature.push_back(m.norm_params.per_feature[j]);
        }
    }
    if (keep.empty())
        throw ValidationError("window '" + window.name + "' selects no feature columns");
    out.values.resize(m.values.rows(), static_cast<Eigen::Index>(keep.size()));
    for (size_t j = 0; j < keep.size(); ++j)
        out.values.col(static_cast<Eigen::Index>(j)) = m.values.col(keep[j]);
    return out;
}

std::vector<std::pair<WindowSpec, CvReport>> windowed_experiment(
    const FeatureMatrix& m, const std::vector<WindowSpec>& windows,
    const std::vector<std::string>& labels, const ForestParams& params, int cv_k, uint64_t seed) {
    if (windows.empty()) throw ValidationError("windowed_experiment: no windows given");
    std::vector<std::pair<WindowSpec, CvReport>> out;
    out.reserve(windows.size());
    for (const auto& window : windows) {
        FeatureMatrix sub = window_columns(m, window);
        out.emplace_back(window, cross_validate(sub.values, labels, params, cv_k, seed));
    }
    return out;
}

namespace {

VisitTable restrict_to_pd(const VisitTable& table) {
    VisitTable out;
    std::unordered_set<std::string> seen;
    for (const auto& obs : table.observations) {
        if (obs.cohort_label != CohortLabel::PD) continue;
        out.observations.push_back(obs);
        if (seen.insert(obs.assessment_code).second)
            out.assessment_codes.push_back(obs.assessment_code);
    }
    std::set<int> months;
    for (const auto& obs : out.observations) months.insert(obs.visit_month);
    out.schedule.assign(months.begin(), months.end());
    return out;
}

}  // namespace

ReplicationReport external_replication(const ProgressionSpace& space, const GmmModel& gmm,
                                       const ForestModel& forest, const VisitTable& external) {
    if (external.patient_ids().empty())
        throw SchemaError("external replication: cohort has no patients");
    VisitTable pd = restrict_to_pd(external);
    if (pd.observations.empty())
        throw SchemaError("external replication: cohort has no PD-labeled patients");

    // Vocabulary intersection with the training schema.
    std::vector<std::string> schema_codes;
    std::set<std::string> schema_code_set;
    for (const auto& f : space.feature_names) {
        auto [code, month] = split_feature_name(f);
        if (schema_code_set.insert(code).second) schema_codes.push_back(code);
    }
    std::unordered_set<std::string> ext_codes(pd.assessment_codes.begin(), pd.assessment_codes.end());
    std::vector<std::string> shared, missing;
    for (const auto& code : schema_codes)
        (ext_codes.count(code) ? shared : missing).push_back(code);
    if (shared.empty()) {
        std::string diag = "external replication: no shared assessment codes; training uses {";
        for (size_t i = 0; i < std::min<size_t>(schema_codes.size(), 8); ++i)
            diag += (i ? "," : "") + schema_codes[i];
        diag += "} but external provides {";
        for (size_t i = 0; i < std::min<size_t>(pd.assessment_codes.size(), 8); ++i)
            diag += (i ? "," : "") + pd.assessment_codes[i];
        diag += "}";
        throw SchemaError(diag);
    }

    VisitTable filtered;
    filtered.assessment_codes = shared;
    std::unordered_set<std::string> shared_set(shared.begin(), shared.end());
    for (const auto& obs : pd.observations)
        if (shared_set.count(obs.assessment_code)) filtered.observations.push_back(obs);
    std::set<int> months;
    for (const auto& obs : filtered.observations) months.insert(obs.visit_month);
    filtered.schedule.assign(months.begin(), months.end());

    FeatureMatrix ext = vectorize(impute(filtered));

    // Align to the training schema in raw space; features the external cohort
    // cannot provide are filled at the neutral point of the stored params.
    std::unordered_map<std::string, Eigen::Index> ext_col;
    for (size_t j = 0; j < ext.feature_names.size(); ++j)
        ext_col.emplace(ext.feature_names[j], static_cast<Eigen::Index>(j));
    const Eigen::Index n = ext.values.rows();
    Eigen::MatrixXd raw(n, static_cast<Eigen::Index>(space.feature_names.size()));
    for (size_t j = 0; j < space.feature_names.size(); ++j) {
        auto it = ext_col.find(space.feature_names[j]);
        if (it != ext_col.end()) {
            raw.col(static_cast<Eigen::Index>(j)) = ext.values.col(it->second);
        } else {
            const auto& p = space.norm_params.per_feature[j];
            double fill = 0.0;
            if (space.norm_params.method == Normalization::minmax)
                fill = 0.5 * (p[0] + p[1]);
            else if (space.norm_params.method == Normalization::zscore)
                fill = p[0];
            raw.col(static_cast<Eigen::Index>(j)).setConstant(fill);
        }
    }

    FeatureMatrix aligned;
    aligned.patient_ids = ext.patient_ids;
    aligned.feature_names = space.feature_names;
    aligned.values = apply_norm_params(raw, space.norm_params);
    aligned.normalization = space.norm_params.method;
    aligned.norm_params = space.norm_params;

    Eigen::MatrixXd coords = project(space, aligned);

    ReplicationReport report;
    report.n_patients = static_cast<int>(n);
    report.codes_shared = shared;
    report.codes_missing = missing;
    report.assignment = assign_subtypes(gmm, coords, aligned.patient_ids);

    // Score the trained forest on its own feature columns.
    std::unordered_map<std::string, Eigen::Index> col_of;
    for (size_t j = 0; j < aligned.feature_names.size(); ++j)
        col_of.emplace(aligned.feature_names[j], static_cast<Eigen::Index>(j));
    Eigen::MatrixXd forest_x(n, static_cast<Eigen::Index>(forest.feature_names.size()));
    for (size_t j = 0; j < forest.feature_names.size(); ++j) {
        auto it = col_of.find(forest.feature_names[j]);
        if (it == col_of.end())
            throw SchemaError("external replication: forest feature '" + forest.feature_names[j] +
                              "' missing from the aligned schema");
        forest_x.col(static_cast<Eigen::Index>(j)) = aligned.values.col(it->second);
    }

    Eigen::MatrixXd probs = predict_proba(forest, forest_x);
    report.classes = forest.classes;
    std::set<std::string> present(report.assignment.labels.begin(), report.assignment.labels.end());
    if (present.size() >= 2) {
        MacroAucResult auc = macro_ovr_auc(probs, report.assignment.labels, forest.classes);
        report.per_class_auc = auc.per_class;
        report.auc_defined = auc.defined;
        report.macro_auc = auc.macro;
    } else {
        warn("external replication: every patient was assigned the same subtype; AUC undefined");
        report.per_class_auc.assign(forest.classes.size(), std::numeric_limits<double>::quiet_NaN());
        report.auc_defined.assign(forest.classes.size(), false);
        report.macro_auc = std::numeric_limits<double>::quiet_NaN();
    }

    report.class_balance.assign(forest.classes.size(), 0.0);
    for (const auto& label : report.assignment.labels) {
        for (size_t c = 0; c < forest.classes.size(); ++c)
            if (label == forest.classes[c]) report.class_balance[c] += 1.0;
    }
    for (double& b : report.class_balance) b /= static_cast<double>(n);
    for (double b : report.class_balance)
        if (b < 0.10) report.imbalance_flagged = true;
    return report;
}

}  // namespace pdprog
