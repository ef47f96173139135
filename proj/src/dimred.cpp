#include "pdprog/dimred.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace pdprog {

std::string to_string(DimRedMethod m) {
    switch (m) {
        case DimRedMethod::nmf: return "nmf";
        case DimRedMethod::pca: return "pca";
        case DimRedMethod::ica: return "ica";
    }
    return "nmf";
}

DimRedMethod dimred_method_from_string(const std::string& s) {
    if (s == "nmf") return DimRedMethod::nmf;
    if (s == "pca") return DimRedMethod::pca;
    if (s == "ica") return DimRedMethod::ica;
    throw ValidationError("unknown dimred method '" + s + "' (expected nmf, pca or ica)");
}

namespace {

constexpr double kDiv = 1e-12;  // multiplicative-update division guard

void check_rank(const Eigen::MatrixXd& x, int rank) {
    if (rank < 1) throw ValidationError("rank must be >= 1");
    if (rank > std::min(x.rows(), x.cols()))
        throw ValidationError("rank " + std::to_string(rank) + " exceeds min(rows, cols) = " +
                              std::to_string(std::min(x.rows(), x.cols())));
}

double population_var(const Eigen::Ref<const Eigen::VectorXd>& col) {
    double mean = col.mean();
    return (col.array() - mean).square().sum() / static_cast<double>(col.size());
}

double total_variance(const Eigen::MatrixXd& x) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) total += population_var(x.col(j));
    return total;
}

std::vector<double> component_shares(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& loadings,
                                     const Eigen::MatrixXd& x) {
    // Var of the rank-1 term coords_k * loadings_k, summed over columns,
    // equals popvar(coords_k) * ||loadings_k||^2.
    const double total = total_variance(x);
    std::vector<double> shares(static_cast<size_t>(loadings.rows()), 0.0);
    if (total <= 0.0) return shares;
    for (Eigen::Index k = 0; k < loadings.rows(); ++k) {
        double v = population_var(coords.col(k)) * loadings.row(k).squaredNorm();
        shares[static_cast<size_t>(k)] = std::clamp(v / total, 0.0, 1.0);
    }
    return shares;
}

std::vector<int> share_order(const std::vector<double>& shares) {
    std::vector<int> order(shares.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return shares[static_cast<size_t>(a)] > shares[static_cast<size_t>(b)];
    });
    return order;
}

// Flip component signs so the largest-magnitude loading of each row is
// positive. Applies consistently to coords, loadings and the projector.
void apply_sign_convention(Eigen::MatrixXd& coords, Eigen::MatrixXd& loadings,
                           Eigen::MatrixXd& projection) {
    for (Eigen::Index k = 0; k < loadings.rows(); ++k) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index j = 0; j < loadings.cols(); ++j) {
            double a = std::abs(loadings(k, j));
            if (a > best) {
                best = a;
                arg = j;
            }
        }
        if (loadings(k, arg) < 0.0) {
            loadings.row(k) *= -1.0;
            coords.col(k) *= -1.0;
            if (projection.size() > 0) projection.col(k) *= -1.0;
        }
    }
}

struct Svd {
    Eigen::MatrixXd u;        // n x r
    Eigen::VectorXd singular; // r
    Eigen::MatrixXd v;        // p x r
};

Svd thin_svd(const Eigen::MatrixXd& centered, int rank) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Svd out;
    out.u = svd.matrixU().leftCols(rank);
    out.singular = svd.singularValues().head(rank);
    out.v = svd.matrixV().leftCols(rank);
    return out;
}

void finish_space(ProgressionSpace& space, const Eigen::MatrixXd& x) {
    space.explained_shares = component_shares(space.patient_coords, space.loadings, x);
    space.dimension_order = share_order(space.explained_shares);
}

}  // namespace

ProgressionSpace fit_nmf(const FeatureMatrix& m, const NmfOptions& opt) {
    const Eigen::MatrixXd& x = m.values;
    check_rank(x, opt.rank);
    if (opt.n_restarts < 1) throw ValidationError("n_restarts must be >= 1");
    if ((x.array() < 0.0).any())
        throw ValidationError("nmf precondition violated: input has negative entries");

    const Eigen::Index n = x.rows(), p = x.cols();
    const int r = opt.rank;
    double scale = x.mean() / static_cast<double>(r);
    if (scale <= 0.0) scale = 1e-8;

    double best_obj = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd best_w, best_h;
    DimRedFitReport best_report;

    for (int restart = 0; restart < opt.n_restarts; ++restart) {
        auto rng = make_rng(opt.seed, static_cast<uint64_t>(restart));
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        Eigen::MatrixXd w(n, r), h(r, p);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index k = 0; k < r; ++k) w(i, k) = uni(rng) * scale;
        for (Eigen::Index k = 0; k < r; ++k)
            for (Eigen::Index j = 0; j < p; ++j) h(k, j) = uni(rng) * scale;

        DimRedFitReport report;
        double obj = (x - w * h).squaredNorm();
        report.objective_history.push_back(obj);
        report.best_restart = restart;

        for (int it = 1; it <= opt.max_iter; ++it) {
            Eigen::MatrixXd w_num = x * h.transpose();
            Eigen::MatrixXd w_den = w * (h * h.transpose());
            w.array() *= w_num.array() / (w_den.array() + kDiv);
            Eigen::MatrixXd h_num = w.transpose() * x;
            Eigen::MatrixXd h_den = (w.transpose() * w) * h;
            h.array() *= h_num.array() / (h_den.array() + kDiv);
            double prev = obj;
            obj = (x - w * h).squaredNorm();
            report.objective_history.push_back(obj);
            report.iterations = it;
            if ((prev - obj) / std::max(prev, kDiv) < opt.tol) {
                report.converged = true;
                break;
            }
        }
        report.final_objective = obj;
        if (obj < best_obj) {
            best_obj = obj;
            best_w = std::move(w);
            best_h = std::move(h);
            best_report = std::move(report);
        }
    }

    ProgressionSpace space;
    space.method = DimRedMethod::nmf;
    space.rank = r;
    space.patient_coords = std::move(best_w);
    space.loadings = std::move(best_h);
    space.feature_names = m.feature_names;
    space.norm_params = m.norm_params;
    space.fit_report = std::move(best_report);
    finish_space(space, x);
    return space;
}

ProgressionSpace fit_pca(const FeatureMatrix& m, int rank) {
    const Eigen::MatrixXd& x = m.values;
    check_rank(x, rank);

    Eigen::VectorXd means = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - means.transpose();
    Svd svd = thin_svd(centered, rank);

    ProgressionSpace space;
    space.method = DimRedMethod::pca;
    space.rank = rank;
    space.patient_coords = svd.u * svd.singular.asDiagonal();
    space.loadings = svd.v.transpose();
    space.projection = svd.v;
    space.column_means = std::move(means);
    space.feature_names = m.feature_names;
    space.norm_params = m.norm_params;
    apply_sign_convention(space.patient_coords, space.loadings, space.projection);
    space.fit_report.converged = true;
    space.fit_report.final_objective =
        (centered - space.patient_coords * space.loadings).squaredNorm();
    finish_space(space, x);
    return space;
}

namespace {

// M <- (M M^T)^{-1/2} M
Eigen::MatrixXd symmetric_decorrelate(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m * m.transpose());
    if (es.info() != Eigen::Success) throw NumericError("ica: decorrelation eigensolver failed");
    Eigen::VectorXd ev = es.eigenvalues();
    if (ev.minCoeff() <= 0.0) throw NumericError("ica: unmixing matrix became singular");
    Eigen::VectorXd inv_sqrt = ev.array().sqrt().inverse();
    return es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose() * m;
}

}  // namespace

ProgressionSpace fit_ica(const FeatureMatrix& m, const IcaOptions& opt) {
    const Eigen::MatrixXd& x = m.values;
    check_rank(x, opt.rank);
    const Eigen::Index n = x.rows();
    const int r = opt.rank;

    Eigen::VectorXd means = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - means.transpose();
    Svd svd = thin_svd(centered, r);

    // Population-scaled whitening: columns of z have variance exactly 1.
    Eigen::VectorXd eigvals = svd.singular.array().square() / static_cast<double>(n);
    if (eigvals.minCoeff() <= 1e-12 * std::max(eigvals.maxCoeff(), 1e-300))
        throw NumericError("ica: input rank is below the requested component count");
    Eigen::MatrixXd whitener = svd.v * eigvals.cwiseSqrt().cwiseInverse().asDiagonal();  // p x r
    Eigen::MatrixXd z = centered * whitener;

    auto rng = make_rng(opt.seed, 0);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd w(r, r);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < r; ++j) w(i, j) = normal(rng);
    w = symmetric_decorrelate(w);

    DimRedFitReport report;
    for (int it = 1; it <= opt.max_iter; ++it) {
        Eigen::MatrixXd u = z * w.transpose();            // n x r
        Eigen::MatrixXd g = u.array().tanh();             // log-cosh contrast
        Eigen::VectorXd gprime_mean =
            (1.0 - g.array().square()).matrix().colwise().mean().transpose();
        Eigen::MatrixXd w_new =
            (g.transpose() * z) / static_cast<double>(n) - gprime_mean.asDiagonal() * w;
        w_new = symmetric_decorrelate(w_new);

        double change = 0.0;
        Eigen::MatrixXd overlap = w_new * w.transpose();
        for (Eigen::Index k = 0; k < r; ++k)
            change = std::max(change, std::abs(1.0 - std::abs(overlap(k, k))));
        w = std::move(w_new);
        report.iterations = it;
        report.objective_history.push_back(change);
        report.final_objective = change;
        if (change < opt.tol) {
            report.converged = true;
            break;
        }
    }
    if (!report.converged)
        warn("ica did not converge in " + std::to_string(opt.max_iter) + " iterations");

    ProgressionSpace space;
    space.method = DimRedMethod::ica;
    space.rank = r;
    space.patient_coords = z * w.transpose();
    space.loadings = w * eigvals.cwiseSqrt().asDiagonal() * svd.v.transpose();  // r x p
    space.projection = whitener * w.transpose();                                // p x r
    space.column_means = std::move(means);
    space.feature_names = m.feature_names;
    space.norm_params = m.norm_params;
    apply_sign_convention(space.patient_coords, space.loadings, space.projection);
    space.fit_report = std::move(report);
    finish_space(space, x);
    return space;
}

namespace {

// Columns of m reordered to the space's feature schema (aligned by name).
Eigen::MatrixXd aligned_values(const ProgressionSpace& space, const FeatureMatrix& m) {
    if (m.feature_names == space.feature_names) return m.values;
    if (m.feature_names.size() != space.feature_names.size())
        throw SchemaError("projection schema mismatch: expected " +
                          std::to_string(space.feature_names.size()) + " features, got " +
                          std::to_string(m.feature_names.size()));
    std::unordered_map<std::string, Eigen::Index> col_of;
    for (size_t j = 0; j < m.feature_names.size(); ++j)
        col_of.emplace(m.feature_names[j], static_cast<Eigen::Index>(j));
    Eigen::MatrixXd out(m.values.rows(), m.values.cols());
    for (size_t j = 0; j < space.feature_names.size(); ++j) {
        auto it = col_of.find(space.feature_names[j]);
        if (it == col_of.end())
            throw SchemaError("projection schema mismatch: feature '" + space.feature_names[j] +
                              "' missing from input");
        out.col(static_cast<Eigen::Index>(j)) = m.values.col(it->second);
    }
    return out;
}

// Nonnegative least squares for one row against frozen loadings, by
// multiplicative updates on the coordinates only.
Eigen::RowVectorXd nnls_row(const Eigen::RowVectorXd& x, const Eigen::MatrixXd& h,
                            const Eigen::MatrixXd& hht) {
    const int r = static_cast<int>(h.rows());
    double scale = x.mean() / static_cast<double>(r);
    if (scale <= 0.0) return Eigen::RowVectorXd::Zero(r);
    Eigen::RowVectorXd w = Eigen::RowVectorXd::Constant(r, scale);
    Eigen::RowVectorXd xht = x * h.transpose();
    double obj = (x - w * h).squaredNorm();
    for (int it = 0; it < 2000; ++it) {
        Eigen::RowVectorXd den = w * hht;
        w.array() *= xht.array() / (den.array() + kDiv);
        double prev = obj;
        obj = (x - w * h).squaredNorm();
        if (prev - obj < 1e-13 * std::max(prev, kDiv)) break;
    }
    return w;
}

}  // namespace

Eigen::MatrixXd project(const ProgressionSpace& space, const FeatureMatrix& m) {
    Eigen::MatrixXd values = aligned_values(space, m);
    if (space.method == DimRedMethod::nmf) {
        if ((values.array() < 0.0).any())
            throw ValidationError("nmf projection requires nonnegative input");
        Eigen::MatrixXd hht = space.loadings * space.loadings.transpose();
        Eigen::MatrixXd coords(values.rows(), space.rank);
        for (Eigen::Index i = 0; i < values.rows(); ++i)
            coords.row(i) = nnls_row(values.row(i), space.loadings, hht);
        return coords;
    }
    return (values.rowwise() - space.column_means.transpose()) * space.projection;
}

std::vector<double> explained_variance(const ProgressionSpace& space, const FeatureMatrix& m) {
    Eigen::MatrixXd coords = project(space, m);
    return component_shares(coords, space.loadings, aligned_values(space, m));
}

void name_dimensions(ProgressionSpace& space, const std::map<std::string, std::string>& code_families) {
    space.dimension_names.assign(static_cast<size_t>(space.rank), "");
    std::vector<std::string> families;  // stable order of first appearance
    std::unordered_map<std::string, size_t> family_idx;
    std::vector<size_t> family_of_feature(space.feature_names.size(), SIZE_MAX);
    for (size_t j = 0; j < space.feature_names.size(); ++j) {
        auto [code, month] = split_feature_name(space.feature_names[j]);
        auto it = code_families.find(code);
        if (it == code_families.end()) continue;
        auto [fit, inserted] = family_idx.emplace(it->second, families.size());
        if (inserted) families.push_back(it->second);
        family_of_feature[j] = fit->second;
    }
    if (families.empty()) return;

    for (int k = 0; k < space.rank; ++k) {
        std::vector<double> weight(families.size(), 0.0);
        for (size_t j = 0; j < space.feature_names.size(); ++j) {
            if (family_of_feature[j] == SIZE_MAX) continue;
            weight[family_of_feature[j]] += std::abs(space.loadings(k, static_cast<Eigen::Index>(j)));
        }
        size_t best = 0;
        for (size_t f = 1; f < families.size(); ++f)
            if (weight[f] > weight[best]) best = f;
        space.dimension_names[static_cast<size_t>(k)] = families[best];
    }
}

Eigen::MatrixXd ordered_coords(const ProgressionSpace& space, const Eigen::MatrixXd& coords) {
    Eigen::MatrixXd out(coords.rows(), coords.cols());
    for (size_t pos = 0; pos < space.dimension_order.size(); ++pos)
        out.col(static_cast<Eigen::Index>(pos)) = coords.col(space.dimension_order[pos]);
    return out;
}

}  // namespace pdprog
