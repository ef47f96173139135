#include "pdprog/serialize.hpp"

#include <fstream>

namespace pdprog {

namespace {

Json matrix_to_json(const Eigen::MatrixXd& m) {
    Json data = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
    Eigen::Index rows = j.at("rows").get<Eigen::Index>();
    Eigen::Index cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw SchemaError("matrix json: data length does not match rows*cols");
    Eigen::MatrixXd m(rows, cols);
    size_t idx = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index jj = 0; jj < cols; ++jj) m(i, jj) = data[idx++].get<double>();
    return m;
}

Json vector_to_json(const Eigen::VectorXd& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Eigen::VectorXd vector_from_json(const Json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[static_cast<size_t>(i)].get<double>();
    return v;
}

}  // namespace

Json to_json(const NormParams& params) {
    Json per_feature = Json::array();
    for (const auto& p : params.per_feature) per_feature.push_back({p[0], p[1]});
    return Json{{"method", to_string(params.method)}, {"per_feature", std::move(per_feature)}};
}

NormParams norm_params_from_json(const Json& j) {
    NormParams params;
    params.method = normalization_from_string(j.at("method").get<std::string>());
    for (const auto& p : j.at("per_feature"))
        params.per_feature.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    return params;
}

Json to_json(const ProgressionSpace& space) {
    Json j{{"method", to_string(space.method)},
           {"rank", space.rank},
           {"feature_names", space.feature_names},
           {"patient_coords", matrix_to_json(space.patient_coords)},
           {"loadings", matrix_to_json(space.loadings)},
           {"explained_shares", space.explained_shares},
           {"dimension_order", space.dimension_order},
           {"dimension_names", space.dimension_names},
           {"norm_params", to_json(space.norm_params)},
           {"fit_report",
            {{"iterations", space.fit_report.iterations},
             {"final_objective", space.fit_report.final_objective},
             {"converged", space.fit_report.converged},
             {"best_restart", space.fit_report.best_restart}}}};
    if (space.method != DimRedMethod::nmf) {
        j["column_means"] = vector_to_json(space.column_means);
        j["projection"] = matrix_to_json(space.projection);
    }
    return j;
}

ProgressionSpace space_from_json(const Json& j) {
    ProgressionSpace space;
    space.method = dimred_method_from_string(j.at("method").get<std::string>());
    space.rank = j.at("rank").get<int>();
    space.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    space.patient_coords = matrix_from_json(j.at("patient_coords"));
    space.loadings = matrix_from_json(j.at("loadings"));
    space.explained_shares = j.at("explained_shares").get<std::vector<double>>();
    space.dimension_order = j.at("dimension_order").get<std::vector<int>>();
    space.dimension_names = j.at("dimension_names").get<std::vector<std::string>>();
    space.norm_params = norm_params_from_json(j.at("norm_params"));
    const auto& fr = j.at("fit_report");
    space.fit_report.iterations = fr.at("iterations").get<int>();
    space.fit_report.final_objective = fr.at("final_objective").get<double>();
    space.fit_report.converged = fr.at("converged").get<bool>();
    space.fit_report.best_restart = fr.at("best_restart").get<int>();
    if (space.method != DimRedMethod::nmf) {
        space.column_means = vector_from_json(j.at("column_means"));
        space.projection = matrix_from_json(j.at("projection"));
    }
    return space;
}

Json to_json(const GmmModel& model) {
    Json covs = Json::array();
    for (const auto& cov : model.covariances) covs.push_back(matrix_to_json(cov));
    return Json{{"k", model.k},
                {"dim", model.dim},
                {"weights", vector_to_json(model.weights)},
                {"means", matrix_to_json(model.means)},
                {"covariances", std::move(covs)},
                {"log_likelihood", model.log_likelihood},
                {"n_iter", model.n_iter},
                {"converged", model.converged},
                {"subtype_rank", model.subtype_rank},
                {"reg_floor", model.reg_floor}};
}

GmmModel gmm_from_json(const Json& j) {
    GmmModel model;
    model.k = j.at("k").get<int>();
    model.dim = j.at("dim").get<int>();
    model.weights = vector_from_json(j.at("weights"));
    model.means = matrix_from_json(j.at("means"));
    for (const auto& cov : j.at("covariances")) model.covariances.push_back(matrix_from_json(cov));
    model.log_likelihood = j.at("log_likelihood").get<double>();
    model.n_iter = j.at("n_iter").get<int>();
    model.converged = j.at("converged").get<bool>();
    model.subtype_rank = j.at("subtype_rank").get<std::vector<int>>();
    model.reg_floor = j.at("reg_floor").get<double>();
    return model;
}

Json to_json(const ModelSelectionReport& report) {
    Json candidates = Json::array();
    for (const auto& c : report.candidates) {
        Json jc{{"k", c.k}, {"failed", c.failed}};
        if (c.failed) {
            jc["error"] = c.error;
        } else {
            jc["log_likelihood"] = c.log_likelihood;
            jc["n_params"] = c.n_params;
            jc["bic"] = c.bic;
        }
        candidates.push_back(std::move(jc));
    }
    return Json{{"candidates", std::move(candidates)}, {"chosen_k", report.chosen_k}};
}

Json to_json(const ForestModel& model) {
    Json trees = Json::array();
    for (const auto& tree : model.trees) {
        Json nodes = Json::array();
        for (const auto& node : tree.nodes)
            nodes.push_back({node.feature, node.threshold, node.left, node.right, node.counts});
        trees.push_back(std::move(nodes));
    }
    return Json{{"classes", model.classes},
                {"feature_names", model.feature_names},
                {"n_features", model.n_features},
                {"has_oob", model.has_oob},
                {"oob_error", model.oob_error},
                {"importances", model.importances},
                {"has_splits", model.has_splits},
                {"trees", std::move(trees)}};
}

ForestModel forest_from_json(const Json& j) {
    ForestModel model;
    model.classes = j.at("classes").get<std::vector<std::string>>();
    model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    model.n_features = j.at("n_features").get<int>();
    model.has_oob = j.at("has_oob").get<bool>();
    model.oob_error = j.at("oob_error").get<double>();
    model.importances = j.at("importances").get<std::vector<double>>();
    model.has_splits = j.at("has_splits").get<bool>();
    for (const auto& jt : j.at("trees")) {
        Tree tree;
        for (const auto& jn : jt) {
            TreeNode node;
            node.feature = jn.at(0).get<int>();
            node.threshold = jn.at(1).get<double>();
            node.left = jn.at(2).get<int>();
            node.right = jn.at(3).get<int>();
            node.counts = jn.at(4).get<std::vector<double>>();
            tree.nodes.push_back(std::move(node));
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

Json to_json(const CvReport& report) {
    Json per_fold = Json::array();
    for (size_t f = 0; f < report.per_fold_auc.size(); ++f)
        per_fold.push_back({{"fold", f},
                            {"per_class_auc", report.per_fold_auc[f]},
                            {"macro_auc", report.per_fold_macro[f]}});
    Json confusion = Json::array();
    for (Eigen::Index i = 0; i < report.confusion.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index jj = 0; jj < report.confusion.cols(); ++jj)
            row.push_back(report.confusion(i, jj));
        confusion.push_back(std::move(row));
    }
    return Json{{"k", report.k},
                {"classes", report.classes},
                {"fold_of", report.fold_of},
                {"pooled_per_class_auc", report.pooled_auc},
                {"macro_auc", report.macro_auc},
                {"per_fold", std::move(per_fold)},
                {"confusion", std::move(confusion)},
                {"precision", report.precision},
                {"recall", report.recall}};
}

Json to_json(const ReplicationReport& report) {
    return Json{{"n_patients", report.n_patients},
                {"classes", report.classes},
                {"per_class_auc", report.per_class_auc},
                {"macro_auc", report.macro_auc},
                {"class_balance", report.class_balance},
                {"imbalance_flagged", report.imbalance_flagged},
                {"codes_shared", report.codes_shared},
                {"codes_missing", report.codes_missing}};
}

void save_json(const std::string& path, const Json& j) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << j.dump(2) << '\n';
    if (!os) throw IoError("failed writing '" + path + "'");
}

Json load_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    Json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw SchemaError("invalid json in '" + path + "': " + e.what());
    }
    return j;
}

}  // namespace pdprog
