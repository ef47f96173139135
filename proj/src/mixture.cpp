#include "pdprog/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pdprog {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

struct CholeskyComponent {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double log_det = 0.0;
};

CholeskyComponent factorize(const Eigen::MatrixXd& cov, double reg_floor) {
    Eigen::MatrixXd c = cov;
    double bump = reg_floor;
    for (int attempt = 0; attempt < 8; ++attempt) {
        CholeskyComponent out;
        out.llt.compute(c);
        if (out.llt.info() == Eigen::Success) {
            out.log_det = 2.0 * out.llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
            if (std::isfinite(out.log_det)) return out;
        }
        c.diagonal().array() += bump;
        bump *= 10.0;
    }
    throw NumericError("gmm: covariance factorization failed");
}

// Row of log N(x; mu_k, Sigma_k) for every component.
void log_densities(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& means,
                   const std::vector<CholeskyComponent>& chol, Eigen::MatrixXd& out) {
    const Eigen::Index n = coords.rows();
    const Eigen::Index d = coords.cols();
    const Eigen::Index k = means.rows();
    out.resize(n, k);
    Eigen::VectorXd diff(d);
    for (Eigen::Index c = 0; c < k; ++c) {
        const auto& f = chol[static_cast<size_t>(c)];
        for (Eigen::Index i = 0; i < n; ++i) {
            diff = (coords.row(i) - means.row(c)).transpose();
            double maha = f.llt.matrixL().solve(diff).squaredNorm();
            out(i, c) = -0.5 * (static_cast<double>(d) * kLog2Pi + f.log_det + maha);
        }
    }
}

struct EStepResult {
    Eigen::MatrixXd resp;  // n x k
    double log_lik = 0.0;
};

EStepResult e_step(const Eigen::MatrixXd& coords, const Eigen::VectorXd& weights,
                   const Eigen::MatrixXd& means, const std::vector<CholeskyComponent>& chol) {
    const Eigen::Index n = coords.rows();
    const Eigen::Index k = means.rows();
    Eigen::MatrixXd logp;
    log_densities(coords, means, chol, logp);
    Eigen::VectorXd log_w(k);
    for (Eigen::Index c = 0; c < k; ++c)
        log_w(c) = weights(c) > 0.0 ? std::log(weights(c))
                                    : -std::numeric_limits<double>::infinity();

    EStepResult res;
    res.resp.resize(n, k);
    std::vector<double> row(static_cast<size_t>(k));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index c = 0; c < k; ++c) row[static_cast<size_t>(c)] = logp(i, c) + log_w(c);
        double lse = logsumexp(row);
        res.log_lik += lse;
        for (Eigen::Index c = 0; c < k; ++c) {
            double lw = row[static_cast<size_t>(c)];
            res.resp(i, c) = std::isfinite(lw) ? std::exp(lw - lse) : 0.0;
        }
    }
    return res;
}

// k-means++ seeding followed by a single assignment/update pass.
void kmeans_init(const Eigen::MatrixXd& coords, int k, std::mt19937_64& rng,
                 Eigen::VectorXd& weights, Eigen::MatrixXd& means,
                 std::vector<Eigen::MatrixXd>& covs, double reg_floor) {
    const Eigen::Index n = coords.rows();
    const Eigen::Index d = coords.cols();
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    means.resize(k, d);
    means.row(0) = coords.row(pick(rng));
    Eigen::VectorXd dist2 = (coords.rowwise() - means.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
        double total = dist2.sum();
        Eigen::Index chosen;
        if (total > 0.0) {
            double target = uni(rng) * total;
            double acc = 0.0;
            chosen = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += dist2(i);
                if (acc >= target) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = pick(rng);  // all points coincide with a center
        }
        means.row(c) = coords.row(chosen);
        dist2 = dist2.cwiseMin((coords.rowwise() - means.row(c)).rowwise().squaredNorm());
    }

    std::vector<int> assign(static_cast<size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            double d2 = (coords.row(i) - means.row(c)).squaredNorm();
            if (d2 < best) {
                best = d2;
                assign[static_cast<size_t>(i)] = c;
            }
        }
    }

    Eigen::MatrixXd global_cov = Eigen::MatrixXd::Zero(d, d);
    Eigen::RowVectorXd global_mean = coords.colwise().mean();
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::RowVectorXd diff = coords.row(i) - global_mean;
        global_cov += diff.transpose() * diff;
    }
    global_cov /= static_cast<double>(n);
    global_cov.diagonal().array() += reg_floor;

    weights.resize(k);
    covs.assign(static_cast<size_t>(k), Eigen::MatrixXd());
    for (int c = 0; c < k; ++c) {
        std::vector<Eigen::Index> members;
        for (Eigen::Index i = 0; i < n; ++i)
            if (assign[static_cast<size_t>(i)] == c) members.push_back(i);
        if (members.empty()) {
            // Seed keeps its point in all but exact-duplicate ties.
            weights(c) = 1.0;
            covs[static_cast<size_t>(c)] = global_cov;
            continue;
        }
        weights(c) = static_cast<double>(members.size());
        Eigen::RowVectorXd mu = Eigen::RowVectorXd::Zero(d);
        for (Eigen::Index i : members) mu += coords.row(i);
        mu /= static_cast<double>(members.size());
        means.row(c) = mu;
        if (members.size() < 2) {
            covs[static_cast<size_t>(c)] = global_cov;
        } else {
            Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
            for (Eigen::Index i : members) {
                Eigen::RowVectorXd diff = coords.row(i) - mu;
                cov += diff.transpose() * diff;
            }
            cov /= static_cast<double>(members.size());
            cov.diagonal().array() += reg_floor;
            covs[static_cast<size_t>(c)] = cov;
        }
    }
    weights /= weights.sum();
}

std::vector<int> rank_by_mean_norm(const Eigen::MatrixXd& means) {
    const int k = static_cast<int>(means.rows());
    std::vector<int> by_norm(static_cast<size_t>(k));
    std::iota(by_norm.begin(), by_norm.end(), 0);
    std::stable_sort(by_norm.begin(), by_norm.end(), [&](int a, int b) {
        return means.row(a).norm() < means.row(b).norm();
    });
    std::vector<int> rank(static_cast<size_t>(k));
    for (int r = 0; r < k; ++r) rank[static_cast<size_t>(by_norm[static_cast<size_t>(r)])] = r;
    return rank;
}

}  // namespace

GmmModel fit_gmm(const Eigen::MatrixXd& coords, int k, const GmmOptions& opt) {
    const Eigen::Index n = coords.rows();
    const Eigen::Index d = coords.cols();
    if (k < 1) throw ValidationError("gmm: k must be >= 1");
    if (n < k) throw ValidationError("gmm: need at least k=" + std::to_string(k) + " points, got " +
                                     std::to_string(n));
    if (d < 1) throw ValidationError("gmm: need at least one dimension");
    if (!coords.allFinite()) throw ValidationError("gmm: non-finite coordinate in input");
    if (opt.n_init < 1) throw ValidationError("gmm: n_init must be >= 1");

    GmmModel best;
    double best_ll = -std::numeric_limits<double>::infinity();

    for (int init = 0; init < opt.n_init; ++init) {
        auto rng = make_rng(opt.seed, static_cast<uint64_t>(init));
        GmmModel model;
        model.k = k;
        model.dim = static_cast<int>(d);
        model.reg_floor = opt.reg_floor;
        kmeans_init(coords, k, rng, model.weights, model.means, model.covariances, opt.reg_floor);

        std::vector<CholeskyComponent> chol(static_cast<size_t>(k));
        for (int c = 0; c < k; ++c)
            chol[static_cast<size_t>(c)] = factorize(model.covariances[static_cast<size_t>(c)], opt.reg_floor);

        double prev_mean_ll = -std::numeric_limits<double>::infinity();
        for (int it = 1; it <= opt.max_iter; ++it) {
            EStepResult e = e_step(coords, model.weights, model.means, chol);
            model.ll_history.push_back(e.log_lik);
            model.log_likelihood = e.log_lik;
            model.n_iter = it;

            // M-step (weights end up equal to the mean responsibilities of
            // the E-step above).
            Eigen::VectorXd nk = e.resp.colwise().sum();
            for (int c = 0; c < k; ++c) {
                double mass = nk(c);
                model.weights(c) = mass / static_cast<double>(n);
                if (mass < 1e-12) continue;  // dead component keeps its parameters
                model.means.row(c) = (e.resp.col(c).transpose() * coords) / mass;
                Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
                for (Eigen::Index i = 0; i < n; ++i) {
                    Eigen::RowVectorXd diff = coords.row(i) - model.means.row(c);
                    cov += e.resp(i, c) * (diff.transpose() * diff);
                }
                cov /= mass;
                cov.diagonal().array() += opt.reg_floor;
                model.covariances[static_cast<size_t>(c)] = cov;
                chol[static_cast<size_t>(c)] = factorize(cov, opt.reg_floor);
            }

            double mean_ll = e.log_lik / static_cast<double>(n);
            if (mean_ll - prev_mean_ll < opt.tol) {
                model.converged = true;
                break;
            }
            prev_mean_ll = mean_ll;
        }

        if (model.log_likelihood > best_ll) {
            best_ll = model.log_likelihood;
            best = std::move(model);
        }
    }

    best.subtype_rank = rank_by_mean_norm(best.means);
    return best;
}

double log_likelihood(const GmmModel& model, const Eigen::MatrixXd& coords) {
    if (coords.cols() != model.dim)
        throw ValidationError("gmm: coordinate dimension " + std::to_string(coords.cols()) +
                              " does not match model dimension " + std::to_string(model.dim));
    std::vector<CholeskyComponent> chol(static_cast<size_t>(model.k));
    for (int c = 0; c < model.k; ++c)
        chol[static_cast<size_t>(c)] = factorize(model.covariances[static_cast<size_t>(c)], model.reg_floor);
    return e_step(coords, model.weights, model.means, chol).log_lik;
}

int gmm_n_params(int k, int d) {
    return (k - 1) + k * d + k * d * (d + 1) / 2;
}

double bic_from(double log_lik, int n_params, int n) {
    return static_cast<double>(n_params) * std::log(static_cast<double>(n)) - 2.0 * log_lik;
}

double bic(const GmmModel& model, const Eigen::MatrixXd& coords) {
    return bic_from(log_likelihood(model, coords), gmm_n_params(model.k, model.dim),
                    static_cast<int>(coords.rows()));
}

std::pair<ModelSelectionReport, GmmModel> select_k(const Eigen::MatrixXd& coords, int k_min,
                                                   int k_max, const GmmOptions& opt) {
    if (k_min < 1 || k_max < k_min || k_max > coords.rows())
        throw ValidationError("gmm: k range [" + std::to_string(k_min) + "," + std::to_string(k_max) +
                              "] must lie within [1, " + std::to_string(coords.rows()) + "]");

    ModelSelectionReport report;
    std::vector<GmmModel> models;
    for (int k = k_min; k <= k_max; ++k) {
        ModelSelectionCandidate cand;
        cand.k = k;
        try {
            GmmOptions per_k = opt;
            per_k.seed = mix_seed(opt.seed, static_cast<uint64_t>(k));
            GmmModel model = fit_gmm(coords, k, per_k);
            cand.log_likelihood = log_likelihood(model, coords);
            cand.n_params = gmm_n_params(k, model.dim);
            cand.bic = bic_from(cand.log_likelihood, cand.n_params, static_cast<int>(coords.rows()));
            models.push_back(std::move(model));
        } catch (const Error& e) {
            cand.failed = true;
            cand.error = e.what();
            warn("select_k: k=" + std::to_string(k) + " failed: " + cand.error);
        }
        report.candidates.push_back(std::move(cand));
    }

    int best_idx = -1;
    size_t model_idx = 0, best_model_idx = 0;
    for (size_t i = 0; i < report.candidates.size(); ++i) {
        const auto& cand = report.candidates[i];
        if (cand.failed) continue;
        if (best_idx < 0 || cand.bic < report.candidates[static_cast<size_t>(best_idx)].bic) {
            best_idx = static_cast<int>(i);
            best_model_idx = model_idx;
        }
        ++model_idx;
    }
    if (best_idx < 0) throw NumericError("select_k: every candidate k failed to fit");
    report.chosen_k = report.candidates[static_cast<size_t>(best_idx)].k;
    return {std::move(report), std::move(models[best_model_idx])};
}

Eigen::MatrixXd responsibilities(const GmmModel& model, const Eigen::MatrixXd& coords) {
    if (coords.cols() != model.dim)
        throw ValidationError("gmm: coordinate dimension mismatch");
    std::vector<CholeskyComponent> chol(static_cast<size_t>(model.k));
    for (int c = 0; c < model.k; ++c)
        chol[static_cast<size_t>(c)] = factorize(model.covariances[static_cast<size_t>(c)], model.reg_floor);
    return e_step(coords, model.weights, model.means, chol).resp;
}

std::string subtype_name(int rank) {
    return "PDVec" + std::to_string(rank + 1);
}

SubtypeAssignment assign_subtypes(const GmmModel& model, const Eigen::MatrixXd& coords,
                                  const std::vector<std::string>& patient_ids) {
    if (static_cast<Eigen::Index>(patient_ids.size()) != coords.rows())
        throw ValidationError("assign_subtypes: ids do not align with coordinate rows");

    Eigen::MatrixXd resp = responsibilities(model, coords);
    SubtypeAssignment out;
    out.patient_ids = patient_ids;
    out.responsibilities.resize(resp.rows(), resp.cols());
    for (int c = 0; c < model.k; ++c)
        out.responsibilities.col(model.subtype_rank[static_cast<size_t>(c)]) = resp.col(c);

    out.labels.resize(patient_ids.size());
    for (Eigen::Index i = 0; i < resp.rows(); ++i) {
        int best = 0;
        for (int r = 1; r < model.k; ++r)
            if (out.responsibilities(i, r) > out.responsibilities(i, best)) best = r;
        out.labels[static_cast<size_t>(i)] = subtype_name(best);
    }
    return out;
}

}  // namespace pdprog
