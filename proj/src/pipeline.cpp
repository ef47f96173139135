#include "pdprog/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "pdprog/serialize.hpp"

namespace fs = std::filesystem;

namespace pdprog {

namespace {

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

std::ofstream open_output(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    return os;
}

[[noreturn]] void rethrow_tagged(const std::string& stage) {
    auto tag = [&](const std::string& what) { return "stage " + stage + ": " + what; };
    try {
        throw;
    } catch (const ParseError& e) {
        throw ParseError(tag(e.what()));
    } catch (const ConflictError& e) {
        throw ConflictError(tag(e.what()));
    } catch (const SchemaError& e) {
        throw SchemaError(tag(e.what()));
    } catch (const ValidationError& e) {
        throw ValidationError(tag(e.what()));
    } catch (const IoError& e) {
        throw IoError(tag(e.what()));
    } catch (const NumericError& e) {
        throw NumericError(tag(e.what()));
    } catch (const std::exception& e) {
        throw NumericError(tag(e.what()));
    }
}

class Manifest {
public:
    explicit Manifest(const std::string& path) : path_(path) { rewrite(); }

    void done(const std::string& stage) {
        lines_.push_back(stage + " ok");
        rewrite();
    }
    void fail(const std::string& stage) {
        lines_.push_back("failed at " + stage);
        rewrite();
    }
    void complete() {
        lines_.push_back("complete");
        rewrite();
    }

private:
    void rewrite() {
        auto os = open_output(path_);
        for (const auto& line : lines_) os << line << '\n';
    }
    std::string path_;
    std::vector<std::string> lines_;
};

std::string join_path(const std::string& dir, const std::string& file) {
    return (fs::path(dir) / file).string();
}

// Variance-ranked view of a coordinate matrix plus the 2-D (motor, combined)
// projection used for the flat progression-space plots.
struct OrderedView {
    Eigen::MatrixXd coords;      // columns in descending-share order
    std::vector<std::string> names;  // per ordered column
    int motor_pos = 0;           // ordered column treated as the motor axis
};

OrderedView make_ordered_view(const ProgressionSpace& space, const Eigen::MatrixXd& raw_coords) {
    OrderedView view;
    view.coords = ordered_coords(space, raw_coords);
    view.names.resize(static_cast<size_t>(space.rank));
    for (size_t pos = 0; pos < view.names.size(); ++pos) {
        int comp = space.dimension_order[pos];
        std::string name = space.dimension_names.empty()
                               ? ""
                               : space.dimension_names[static_cast<size_t>(comp)];
        view.names[pos] = name.empty() ? "dim" + std::to_string(pos + 1) : name;
        if (name == "motor") view.motor_pos = static_cast<int>(pos);
    }
    return view;
}

Eigen::MatrixXd combined_2d(const OrderedView& view) {
    Eigen::MatrixXd out(view.coords.rows(), 2);
    out.col(0) = view.coords.col(view.motor_pos);
    out.col(1).setZero();
    for (Eigen::Index k = 0; k < view.coords.cols(); ++k)
        if (static_cast<int>(k) != view.motor_pos) out.col(1) += view.coords.col(k);
    return out;
}

void write_coordinates_csv(const std::string& path, const std::vector<std::string>& ids,
                           const Eigen::MatrixXd& coords) {
    auto os = open_output(path);
    os << "patient_id";
    for (Eigen::Index k = 0; k < coords.cols(); ++k) os << ",dim" << (k + 1);
    os << '\n';
    for (Eigen::Index i = 0; i < coords.rows(); ++i) {
        os << ids[static_cast<size_t>(i)];
        for (Eigen::Index k = 0; k < coords.cols(); ++k) os << ',' << format_double(coords(i, k));
        os << '\n';
    }
}

void write_roc_csv(const std::string& path, const RocCurve& curve) {
    auto os = open_output(path);
    os << "fpr,tpr,threshold\n";
    for (size_t i = 0; i < curve.points.size(); ++i)
        os << format_double(curve.points[i].first) << ',' << format_double(curve.points[i].second)
           << ',' << format_double(curve.thresholds[i]) << '\n';
}

Json window_report_json(const WindowSpec& window, const CvReport& report) {
    Json j = to_json(report);
    j["window"] = window.name;
    j["months"] = window.months;
    return j;
}

}  // namespace

void cmd_synth(const PipelineConfig& cfg) {
    CohortSpec spec = cfg.synth;
    spec.seed = cfg.seed;
    spec.schedule = cfg.schedule;

    ensure_out_dir(cfg.out_dir);
    SyntheticCohort cohort = generate_cohort(spec);
    {
        auto os = open_output(join_path(cfg.out_dir, "visits.csv"));
        write_visits_csv(os, cohort.visits);
    }
    {
        auto os = open_output(join_path(cfg.out_dir, "truth.csv"));
        write_truth_csv(os, cohort);
    }

    std::map<std::string, int> counts;
    for (const auto& [id, group] : cohort.truth) counts[group] += 1;
    std::cout << "wrote " << cohort.truth.size() << " patients to " << cfg.out_dir << "\n";
    for (const auto& g : kGroupNames) std::cout << "  " << g << ": " << counts[g] << "\n";
}

void cmd_run(const PipelineConfig& cfg) {
    ensure_out_dir(cfg.out_dir);
    Manifest manifest(join_path(cfg.out_dir, "MANIFEST.txt"));
    std::string stage = "ingest";
    try {
        if (!fs::exists(cfg.input)) throw IoError("input file '" + cfg.input + "' does not exist");
        std::ifstream is(cfg.input);
        if (!is) throw IoError("cannot open input file '" + cfg.input + "'");
        VisitTable table = parse_visits(is, cfg.schedule_config());
        manifest.done(stage);

        stage = "impute";
        VisitTable filled = impute(table);
        manifest.done(stage);

        stage = "vectorize";
        FeatureMatrix raw = vectorize(filled);
        manifest.done(stage);

        stage = "drop_static";
        raw = drop_static_features(raw, cfg.drop_epsilon);
        manifest.done(stage);

        stage = "normalize";
        FeatureMatrix matrix = normalize(raw, cfg.norm_method);
        {
            auto os = open_output(join_path(cfg.out_dir, "feature_matrix.csv"));
            write_feature_matrix_csv(os, matrix);
        }
        manifest.done(stage);

        stage = "dimred";
        ProgressionSpace space;
        switch (cfg.dimred_method) {
            case DimRedMethod::nmf:
                space = fit_nmf(matrix, {cfg.dimred_rank, cfg.dimred_max_iter, cfg.dimred_tol,
                                         cfg.dimred_seed(), cfg.dimred_restarts});
                break;
            case DimRedMethod::pca:
                space = fit_pca(matrix, cfg.dimred_rank);
                break;
            case DimRedMethod::ica:
                space = fit_ica(matrix, {cfg.dimred_rank, cfg.dimred_max_iter, cfg.dimred_tol,
                                         cfg.dimred_seed()});
                break;
        }
        {
            std::map<std::string, std::string> families;
            for (const auto& name : space.feature_names) {
                auto [code, month] = split_feature_name(name);
                std::string fam = cfg.family_of(code);
                if (!fam.empty()) families[code] = fam;
            }
            name_dimensions(space, families);
        }
        save_json(join_path(cfg.out_dir, "progression_space.json"), to_json(space));
        OrderedView view = make_ordered_view(space, space.patient_coords);
        write_coordinates_csv(join_path(cfg.out_dir, "coordinates.csv"), matrix.patient_ids,
                              view.coords);
        {
            Eigen::MatrixXd flat = combined_2d(view);
            auto os = open_output(join_path(cfg.out_dir, "coordinates_2d.csv"));
            os << "patient_id," << view.names[static_cast<size_t>(view.motor_pos)] << ",combined\n";
            for (Eigen::Index i = 0; i < flat.rows(); ++i)
                os << matrix.patient_ids[static_cast<size_t>(i)] << ',' << format_double(flat(i, 0))
                   << ',' << format_double(flat(i, 1)) << '\n';
        }
        manifest.done(stage);

        stage = "gmm";
        std::vector<int> pd_rows;
        {
            auto labels = filled.patient_labels();
            for (size_t i = 0; i < labels.size(); ++i)
                if (labels[i] == CohortLabel::PD) pd_rows.push_back(static_cast<int>(i));
        }
        if (pd_rows.empty()) throw ValidationError("no PD-labeled patients to subtype");
        std::vector<std::string> pd_ids;
        pd_ids.reserve(pd_rows.size());
        for (int r : pd_rows) pd_ids.push_back(matrix.patient_ids[static_cast<size_t>(r)]);

        Eigen::MatrixXd pd_coords(static_cast<Eigen::Index>(pd_rows.size()), view.coords.cols());
        for (size_t i = 0; i < pd_rows.size(); ++i)
            pd_coords.row(static_cast<Eigen::Index>(i)) = view.coords.row(pd_rows[static_cast<size_t>(i)]);
        Eigen::MatrixXd gmm_input = pd_coords;
        if (cfg.gmm_use_2d) {
            OrderedView pd_view = view;
            pd_view.coords = pd_coords;
            gmm_input = combined_2d(pd_view);
        }

        GmmOptions gmm_opt{cfg.gmm_max_iter, cfg.gmm_tol, cfg.gmm_seed(), cfg.gmm_n_init,
                           cfg.gmm_reg_floor};
        auto [selection, gmm] = select_k(gmm_input, cfg.gmm_k_min, cfg.gmm_k_max, gmm_opt);
        SubtypeAssignment assignment = assign_subtypes(gmm, gmm_input, pd_ids);
        {
            Json j = to_json(gmm);
            j["selection"] = to_json(selection);
            save_json(join_path(cfg.out_dir, "gmm.json"), j);
        }
        {
            auto os = open_output(join_path(cfg.out_dir, "assignments.csv"));
            os << "patient_id,subtype";
            for (int c = 0; c < gmm.k; ++c) os << ",resp_" << (c + 1);
            os << '\n';
            for (size_t i = 0; i < assignment.patient_ids.size(); ++i) {
                os << assignment.patient_ids[i] << ',' << assignment.labels[i];
                for (int c = 0; c < gmm.k; ++c)
                    os << ',' << format_double(assignment.responsibilities(
                                  static_cast<Eigen::Index>(i), c));
                os << '\n';
            }
        }
        manifest.done(stage);

        stage = "forest";
        FeatureMatrix pd_matrix;
        pd_matrix.patient_ids = pd_ids;
        pd_matrix.feature_names = matrix.feature_names;
        pd_matrix.normalization = matrix.normalization;
        pd_matrix.norm_params = matrix.norm_params;
        pd_matrix.values.resize(static_cast<Eigen::Index>(pd_rows.size()), matrix.values.cols());
        for (size_t i = 0; i < pd_rows.size(); ++i)
            pd_matrix.values.row(static_cast<Eigen::Index>(i)) = matrix.values.row(pd_rows[i]);

        const WindowSpec* forest_window = nullptr;
        for (const auto& w : cfg.windows)
            if (w.name == cfg.forest_window) forest_window = &w;
        if (!forest_window)
            throw ValidationError("forest.window '" + cfg.forest_window +
                                  "' is not one of the configured windows");
        FeatureMatrix forest_features = window_columns(pd_matrix, *forest_window);
        ForestParams forest_params = cfg.forest;
        forest_params.seed = cfg.forest_seed();
        ForestModel forest = train_forest(forest_features.values, assignment.labels, forest_params,
                                          forest_features.feature_names);
        save_json(join_path(cfg.out_dir, "forest.json"), to_json(forest));
        {
            auto os = open_output(join_path(cfg.out_dir, "importances.csv"));
            os << "feature,importance\n";
            for (const auto& [name, value] : feature_importance(forest))
                os << name << ',' << format_double(value) << '\n';
        }
        manifest.done(stage);

        stage = "cross_validate";
        auto window_reports = windowed_experiment(pd_matrix, cfg.windows, assignment.labels,
                                                  forest_params, cfg.cv_k, cfg.cv_seed());
        const CvReport* headline = nullptr;
        for (const auto& [window, report] : window_reports)
            if (window.name == cfg.forest_window) headline = &report;
        for (size_t c = 0; headline && c < headline->classes.size(); ++c) {
            if (!headline->pooled_auc_defined[c]) continue;
            std::vector<double> scores(assignment.labels.size());
            std::vector<int> binary(assignment.labels.size());
            for (size_t i = 0; i < assignment.labels.size(); ++i) {
                scores[i] = headline->pooled_probs(static_cast<Eigen::Index>(i),
                                                   static_cast<Eigen::Index>(c));
                binary[i] = assignment.labels[i] == headline->classes[c] ? 1 : 0;
            }
            write_roc_csv(join_path(cfg.out_dir, "roc_" + headline->classes[c] + ".csv"),
                          roc_curve(scores, binary));
        }
        manifest.done(stage);

        stage = "summary";
        Json summary;
        summary["seed"] = cfg.seed;
        summary["n_patients"] = matrix.patient_ids.size();
        summary["n_pd"] = pd_ids.size();
        summary["dimred"] = {{"method", to_string(cfg.dimred_method)},
                             {"rank", cfg.dimred_rank},
                             {"converged", space.fit_report.converged},
                             {"final_objective", space.fit_report.final_objective}};
        {
            Json dims = Json::array();
            for (size_t pos = 0; pos < view.names.size(); ++pos) {
                int comp = space.dimension_order[pos];
                dims.push_back({{"name", view.names[pos]},
                                {"explained_share",
                                 space.explained_shares[static_cast<size_t>(comp)]}});
            }
            summary["dimensions"] = std::move(dims);
        }
        summary["chosen_k"] = selection.chosen_k;
        summary["selection"] = to_json(selection);
        {
            std::map<std::string, int> counts;
            for (const auto& label : assignment.labels) counts[label] += 1;
            summary["subtype_counts"] = counts;
        }
        summary["forest_window"] = cfg.forest_window;
        if (forest.has_oob) summary["oob_error"] = forest.oob_error;
        {
            Json windows = Json::array();
            for (const auto& [window, report] : window_reports)
                windows.push_back(window_report_json(window, report));
            summary["windows"] = std::move(windows);
        }
        save_json(join_path(cfg.out_dir, "summary.json"), summary);
        manifest.done(stage);
        manifest.complete();

        std::cout << "run complete: chosen_k=" << selection.chosen_k;
        if (headline) std::cout << ", " << cfg.forest_window << " macro AUC="
                                << format_double(headline->macro_auc);
        std::cout << ", outputs in " << cfg.out_dir << "\n";
    } catch (...) {
        manifest.fail(stage);
        rethrow_tagged(stage);
    }
}

void cmd_replicate(const PipelineConfig& cfg, const std::string& model_dir,
                   const std::string& external_csv) {
    ensure_out_dir(cfg.out_dir);
    std::string stage = "load_artifacts";
    try {
        ProgressionSpace space =
            space_from_json(load_json(join_path(model_dir, "progression_space.json")));
        GmmModel gmm = gmm_from_json(load_json(join_path(model_dir, "gmm.json")));
        ForestModel forest = forest_from_json(load_json(join_path(model_dir, "forest.json")));

        stage = "ingest_external";
        if (!fs::exists(external_csv))
            throw IoError("external file '" + external_csv + "' does not exist");
        std::ifstream is(external_csv);
        if (!is) throw IoError("cannot open external file '" + external_csv + "'");
        VisitTable external = parse_visits(is, cfg.schedule_config());

        stage = "replicate";
        ReplicationReport report = external_replication(space, gmm, forest, external);
        save_json(join_path(cfg.out_dir, "replication.json"), to_json(report));
        {
            auto os = open_output(join_path(cfg.out_dir, "replication_assignments.csv"));
            os << "patient_id,subtype";
            for (int c = 0; c < gmm.k; ++c) os << ",resp_" << (c + 1);
            os << '\n';
            const auto& assignment = report.assignment;
            for (size_t i = 0; i < assignment.patient_ids.size(); ++i) {
                os << assignment.patient_ids[i] << ',' << assignment.labels[i];
                for (int c = 0; c < gmm.k; ++c)
                    os << ',' << format_double(
                                  assignment.responsibilities(static_cast<Eigen::Index>(i), c));
                os << '\n';
            }
        }
        std::cout << "replication complete: n=" << report.n_patients
                  << ", macro AUC=" << format_double(report.macro_auc) << ", outputs in "
                  << cfg.out_dir << "\n";
    } catch (...) {
        rethrow_tagged(stage);
    }
}

}  // namespace pdprog
