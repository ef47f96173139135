#include "pdprog/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace pdprog {

CohortLabel cohort_label_from_string(const std::string& s) {
    if (s == "PD") return CohortLabel::PD;
    if (s == "Prodromal") return CohortLabel::Prodromal;
    if (s == "HC") return CohortLabel::HC;
    if (s == "SWEDD") return CohortLabel::SWEDD;
    throw ValidationError("unknown cohort_label '" + s + "' (expected PD, Prodromal, HC or SWEDD)");
}

std::string to_string(CohortLabel label) {
    switch (label) {
        case CohortLabel::PD: return "PD";
        case CohortLabel::Prodromal: return "Prodromal";
        case CohortLabel::HC: return "HC";
        case CohortLabel::SWEDD: return "SWEDD";
    }
    return "PD";
}

std::string to_string(Normalization n) {
    switch (n) {
        case Normalization::raw: return "raw";
        case Normalization::minmax: return "minmax";
        case Normalization::zscore: return "zscore";
    }
    return "raw";
}

Normalization normalization_from_string(const std::string& s) {
    if (s == "raw") return Normalization::raw;
    if (s == "minmax") return Normalization::minmax;
    if (s == "zscore") return Normalization::zscore;
    throw ValidationError("unknown normalization '" + s + "' (expected raw, minmax or zscore)");
}

std::vector<std::string> VisitTable::patient_ids() const {
    std::vector<std::string> ids;
    std::unordered_set<std::string> seen;
    for (const auto& obs : observations) {
        if (seen.insert(obs.patient_id).second) ids.push_back(obs.patient_id);
    }
    return ids;
}

std::vector<CohortLabel> VisitTable::patient_labels() const {
    std::vector<CohortLabel> labels;
    std::unordered_set<std::string> seen;
    for (const auto& obs : observations) {
        if (seen.insert(obs.patient_id).second) labels.push_back(obs.cohort_label);
    }
    return labels;
}

void VisitTable::validate() const {
    for (size_t i = 1; i < schedule.size(); ++i) {
        if (schedule[i] <= schedule[i - 1])
            throw ValidationError("visit schedule is not strictly increasing");
    }
    if (!schedule.empty() && schedule.front() != 0)
        throw ValidationError("visit schedule must start at baseline month 0");
    std::unordered_set<std::string> codes(assessment_codes.begin(), assessment_codes.end());
    for (const auto& obs : observations) {
        if (!codes.count(obs.assessment_code))
            throw ValidationError("observation code '" + obs.assessment_code +
                                  "' missing from assessment_codes");
    }
}

std::string make_feature_name(const std::string& code, int month) {
    return code + "@" + std::to_string(month);
}

std::pair<std::string, int> split_feature_name(const std::string& name) {
    size_t pos = name.rfind('@');
    if (pos == std::string::npos)
        throw ValidationError("feature name '" + name + "' is not of the form code@month");
    long long month = 0;
    if (!try_parse_int(name.substr(pos + 1), month))
        throw ValidationError("feature name '" + name + "' has a non-integer month");
    return {name.substr(0, pos), static_cast<int>(month)};
}

namespace {

// Nearest schedule point within the snap window; -1 when none qualifies.
int snap_month(int raw_month, const ScheduleConfig& cfg) {
    int best = -1;
    int best_dist = cfg.snap_window + 1;
    for (int m : cfg.months) {
        int dist = std::abs(raw_month - m);
        if (dist < best_dist) {
            best_dist = dist;
            best = m;
        }
    }
    return best;
}

}  // namespace

VisitTable parse_visits(std::istream& stream, const ScheduleConfig& cfg) {
    if (cfg.months.empty()) throw ValidationError("schedule config is empty");
    for (size_t i = 1; i < cfg.months.size(); ++i)
        if (cfg.months[i] <= cfg.months[i - 1])
            throw ValidationError("schedule config is not strictly increasing");
    if (cfg.months.front() != 0) throw ValidationError("schedule config must start at month 0");
    if (cfg.snap_window < 0) throw ValidationError("snap_window must be >= 0");

    std::string line;
    if (!std::getline(stream, line)) throw ParseError("empty input: missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const std::vector<std::string> expected = {"patient_id", "cohort_label", "visit_month",
                                               "assessment_code", "value"};
    auto header = split(line, ',');
    for (auto& h : header) h = trim(h);
    if (header != expected)
        throw ParseError("line 1: bad header, expected patient_id,cohort_label,visit_month,"
                         "assessment_code,value");

    VisitTable table;
    std::set<int> months_seen;
    std::vector<std::string> code_order;
    std::unordered_set<std::string> code_set;
    std::unordered_map<std::string, CohortLabel> label_of;
    // (patient, month, code) uniqueness after snapping
    std::set<std::tuple<std::string, int, std::string>> keys;

    long long line_no = 1;
    while (std::getline(stream, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() != 5)
            throw ParseError("line " + std::to_string(line_no) + ": expected 5 fields, got " +
                             std::to_string(fields.size()));

        VisitObservation obs;
        obs.patient_id = trim(fields[0]);
        if (obs.patient_id.empty())
            throw ParseError("line " + std::to_string(line_no) + ": empty patient_id");
        obs.cohort_label = cohort_label_from_string(trim(fields[1]));

        long long raw_month = 0;
        if (!try_parse_int(fields[2], raw_month))
            throw ParseError("line " + std::to_string(line_no) + ": non-integer visit_month '" +
                             trim(fields[2]) + "'");
        obs.assessment_code = trim(fields[3]);
        if (obs.assessment_code.empty())
            throw ParseError("line " + std::to_string(line_no) + ": empty assessment_code");
        double value = 0.0;
        if (!try_parse_double(fields[4], value))
            throw ParseError("line " + std::to_string(line_no) + ": non-numeric value '" +
                             trim(fields[4]) + "'");
        if (!std::isfinite(value))
            throw ParseError("line " + std::to_string(line_no) + ": non-finite value '" +
                             trim(fields[4]) + "'");
        obs.value = value;

        int snapped = snap_month(static_cast<int>(raw_month), cfg);
        if (snapped < 0) {
            warn("line " + std::to_string(line_no) + ": visit_month " + std::to_string(raw_month) +
                 " is outside every schedule window; row ignored");
            continue;
        }
        obs.visit_month = snapped;

        auto it = label_of.find(obs.patient_id);
        if (it == label_of.end()) {
            label_of.emplace(obs.patient_id, obs.cohort_label);
        } else if (it->second != obs.cohort_label) {
            throw ConflictError("line " + std::to_string(line_no) + ": patient '" + obs.patient_id +
                                "' has conflicting cohort labels");
        }

        if (!keys.insert({obs.patient_id, obs.visit_month, obs.assessment_code}).second)
            throw ConflictError("line " + std::to_string(line_no) + ": duplicate observation (" +
                                obs.patient_id + ", month " + std::to_string(obs.visit_month) +
                                ", " + obs.assessment_code + ")");

        months_seen.insert(obs.visit_month);
        if (code_set.insert(obs.assessment_code).second) code_order.push_back(obs.assessment_code);
        table.observations.push_back(std::move(obs));
    }

    table.schedule.assign(months_seen.begin(), months_seen.end());
    table.assessment_codes = std::move(code_order);
    table.validate();
    return table;
}

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

VisitTable impute(const VisitTable& table) {
    const auto ids = table.patient_ids();
    const auto labels = table.patient_labels();
    const auto& schedule = table.schedule;
    const auto& codes = table.assessment_codes;
    const size_t n_months = schedule.size();

    std::unordered_map<std::string, size_t> pat_idx;
    for (size_t i = 0; i < ids.size(); ++i) pat_idx.emplace(ids[i], i);
    std::unordered_map<std::string, size_t> code_idx;
    for (size_t i = 0; i < codes.size(); ++i) code_idx.emplace(codes[i], i);
    std::unordered_map<int, size_t> month_idx;
    for (size_t i = 0; i < n_months; ++i) month_idx.emplace(schedule[i], i);

    const double missing = std::numeric_limits<double>::quiet_NaN();
    // observed[patient][code * n_months + month]
    std::vector<std::vector<double>> observed(
        ids.size(), std::vector<double>(codes.size() * n_months, missing));
    for (const auto& obs : table.observations) {
        size_t p = pat_idx.at(obs.patient_id);
        size_t c = code_idx.at(obs.assessment_code);
        size_t m = month_idx.at(obs.visit_month);
        observed[p][c * n_months + m] = obs.value;
    }

    // Cohort medians per (code, month) from raw observations; a slot nobody
    // observed anywhere in the cohort is unimputable.
    std::vector<double> medians(codes.size() * n_months);
    for (size_t c = 0; c < codes.size(); ++c) {
        for (size_t m = 0; m < n_months; ++m) {
            std::vector<double> vals;
            for (size_t p = 0; p < ids.size(); ++p) {
                double v = observed[p][c * n_months + m];
                if (!std::isnan(v)) vals.push_back(v);
            }
            if (vals.empty())
                throw ValidationError("unimputable: code '" + codes[c] + "' has no observation at month " +
                                      std::to_string(schedule[m]) + " anywhere in the cohort");
            medians[c * n_months + m] = median(std::move(vals));
        }
    }

    VisitTable out;
    out.schedule = schedule;
    out.assessment_codes = codes;
    out.observations.reserve(ids.size() * codes.size() * n_months);
    for (size_t p = 0; p < ids.size(); ++p) {
        for (size_t m = 0; m < n_months; ++m) {
            for (size_t c = 0; c < codes.size(); ++c) {
                double v = observed[p][c * n_months + m];
                if (std::isnan(v)) {
                    // LOCF: the latest earlier raw observation of this code
                    for (size_t back = m; back-- > 0;) {
                        double prev = observed[p][c * n_months + back];
                        if (!std::isnan(prev)) {
                            v = prev;
                            break;
                        }
                    }
                    if (std::isnan(v)) v = medians[c * n_months + m];
                }
                out.observations.push_back({ids[p], labels[p], schedule[m], codes[c], v});
            }
        }
    }
    return out;
}

FeatureMatrix vectorize(const VisitTable& table) {
    const auto ids = table.patient_ids();
    const auto& schedule = table.schedule;
    const auto& codes = table.assessment_codes;
    const size_t n_months = schedule.size();
    const size_t n_feat = codes.size() * n_months;

    FeatureMatrix m;
    m.patient_ids = ids;
    m.feature_names.reserve(n_feat);
    for (size_t mi = 0; mi < n_months; ++mi)
        for (const auto& code : codes) m.feature_names.push_back(make_feature_name(code, schedule[mi]));

    std::unordered_map<std::string, size_t> pat_idx;
    for (size_t i = 0; i < ids.size(); ++i) pat_idx.emplace(ids[i], i);
    std::unordered_map<std::string, size_t> code_idx;
    for (size_t i = 0; i < codes.size(); ++i) code_idx.emplace(codes[i], i);
    std::unordered_map<int, size_t> month_idx;
    for (size_t i = 0; i < n_months; ++i) month_idx.emplace(schedule[i], i);

    const double missing = std::numeric_limits<double>::quiet_NaN();
    m.values = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(ids.size()),
                                         static_cast<Eigen::Index>(n_feat), missing);
    for (const auto& obs : table.observations) {
        size_t p = pat_idx.at(obs.patient_id);
        size_t col = month_idx.at(obs.visit_month) * codes.size() + code_idx.at(obs.assessment_code);
        m.values(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(col)) = obs.value;
    }
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
            if (std::isnan(m.values(i, j)))
                throw ValidationError("vectorize precondition violated: unimputed cell (" + ids[i] +
                                      ", " + m.feature_names[static_cast<size_t>(j)] + ")");
        }
    }
    return m;
}

FeatureMatrix drop_static_features(const FeatureMatrix& m, double epsilon) {
    if (m.normalization != Normalization::raw)
        throw ValidationError("drop_static_features requires a raw matrix");

    // Group columns by assessment code.
    std::vector<std::string> code_order;
    std::map<std::string, std::vector<Eigen::Index>> cols_of;
    for (size_t j = 0; j < m.feature_names.size(); ++j) {
        auto [code, month] = split_feature_name(m.feature_names[j]);
        if (!cols_of.count(code)) code_order.push_back(code);
        cols_of[code].push_back(static_cast<Eigen::Index>(j));
    }

    std::unordered_set<std::string> dropped;
    for (const auto& code : code_order) {
        const auto& cols = cols_of[code];
        double max_range = 0.0;
        for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (Eigen::Index j : cols) {
                lo = std::min(lo, m.values(i, j));
                hi = std::max(hi, m.values(i, j));
            }
            max_range = std::max(max_range, hi - lo);
        }
        if (max_range <= epsilon) dropped.insert(code);
    }
    if (dropped.size() == code_order.size())
        throw ValidationError("degenerate input: every assessment code is static (epsilon=" +
                              format_double(epsilon) + " dropped all codes)");
    if (dropped.empty()) return m;

    FeatureMatrix out;
    out.patient_ids = m.patient_ids;
    out.normalization = m.normalization;
    std::vector<Eigen::Index> keep;
    for (size_t j = 0; j < m.feature_names.size(); ++j) {
        auto [code, month] = split_feature_name(m.feature_names[j]);
        if (!dropped.count(code)) {
            keep.push_back(static_cast<Eigen::Index>(j));
            out.feature_names.push_back(m.feature_names[j]);
        }
    }
    out.values.resize(m.values.rows(), static_cast<Eigen::Index>(keep.size()));
    for (size_t j = 0; j < keep.size(); ++j) out.values.col(static_cast<Eigen::Index>(j)) = m.values.col(keep[j]);
    return out;
}

FeatureMatrix normalize(const FeatureMatrix& m, Normalization method) {
    if (m.normalization != Normalization::raw)
        throw ValidationError("normalize requires a raw matrix");
    if (method == Normalization::raw) return m;

    FeatureMatrix out = m;
    out.normalization = method;
    out.norm_params.method = method;
    out.norm_params.per_feature.resize(m.feature_names.size());

    const Eigen::Index n = m.values.rows();
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
        auto col = m.values.col(j);
        if (method == Normalization::minmax) {
            double lo = col.minCoeff();
            double hi = col.maxCoeff();
            out.norm_params.per_feature[static_cast<size_t>(j)] = {lo, hi};
            if (hi > lo)
                out.values.col(j) = (col.array() - lo) / (hi - lo);
            else
                out.values.col(j).setZero();
        } else {
            double mean = col.mean();
            double var = (col.array() - mean).square().sum() / static_cast<double>(n);
            double sd = std::sqrt(var);
            out.norm_params.per_feature[static_cast<size_t>(j)] = {mean, sd};
            if (sd > 0.0)
                out.values.col(j) = (col.array() - mean) / sd;
            else
                out.values.col(j).setZero();
        }
    }
    return out;
}

Eigen::MatrixXd apply_norm_params(const Eigen::MatrixXd& raw, const NormParams& params) {
    if (params.method == Normalization::raw) return raw;
    if (static_cast<size_t>(raw.cols()) != params.per_feature.size())
        throw SchemaError("apply_norm_params: matrix has " + std::to_string(raw.cols()) +
                          " columns but params cover " + std::to_string(params.per_feature.size()));
    Eigen::MatrixXd out(raw.rows(), raw.cols());
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
        const auto& p = params.per_feature[static_cast<size_t>(j)];
        if (params.method == Normalization::minmax) {
            double span = p[1] - p[0];
            if (span > 0.0)
                out.col(j) = (raw.col(j).array() - p[0]) / span;
            else
                out.col(j).setZero();
        } else {
            if (p[1] > 0.0)
                out.col(j) = (raw.col(j).array() - p[0]) / p[1];
            else
                out.col(j).setZero();
        }
    }
    return out;
}

void write_feature_matrix_csv(std::ostream& os, const FeatureMatrix& m) {
    os << "patient_id";
    for (const auto& f : m.feature_names) os << ',' << f;
    os << '\n';
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
        os << m.patient_ids[static_cast<size_t>(i)];
        for (Eigen::Index j = 0; j < m.values.cols(); ++j) os << ',' << format_double(m.values(i, j));
        os << '\n';
    }
}

}  // namespace pdprog
