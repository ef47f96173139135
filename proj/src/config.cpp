#include "pdprog/config.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>

namespace pdprog {

uint64_t PipelineConfig::dimred_seed() const { return mix_seed(seed, 101); }
uint64_t PipelineConfig::gmm_seed() const { return mix_seed(seed, 102); }
uint64_t PipelineConfig::forest_seed() const { return mix_seed(seed, 103); }
uint64_t PipelineConfig::cv_seed() const { return mix_seed(seed, 104); }

std::string PipelineConfig::family_of(const std::string& code) const {
    auto it = code_families.find(code);
    if (it != code_families.end()) return it->second;
    size_t pos = code.find('_');
    if (pos != std::string::npos && pos > 0) return code.substr(0, pos);
    return "";
}

namespace {

long long parse_int_value(const std::string& key, const std::string& value) {
    long long out = 0;
    if (!try_parse_int(value, out))
        throw ValidationError("config: invalid integer for '" + key + "': '" + value + "'");
    return out;
}

double parse_double_value(const std::string& key, const std::string& value) {
    double out = 0.0;
    if (!try_parse_double(value, out))
        throw ValidationError("config: invalid number for '" + key + "': '" + value + "'");
    return out;
}

bool parse_bool_value(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "on") return true;
    if (value == "false" || value == "0" || value == "off") return false;
    throw ValidationError("config: invalid boolean for '" + key + "': '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    for (const auto& tok : split(value, ',')) {
        if (trim(tok).empty()) continue;
        out.push_back(static_cast<int>(parse_int_value(key, tok)));
    }
    if (out.empty()) throw ValidationError("config: empty list for '" + key + "'");
    return out;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    for (const auto& tok : split(value, ',')) {
        if (trim(tok).empty()) continue;
        out.push_back(parse_double_value(key, tok));
    }
    if (out.empty()) throw ValidationError("config: empty list for '" + key + "'");
    return out;
}

std::vector<std::string> parse_string_list(const std::string& key, const std::string& value) {
    std::vector<std::string> out;
    for (const auto& tok : split(value, ',')) {
        std::string t = trim(tok);
        if (!t.empty()) out.push_back(t);
    }
    if (out.empty()) throw ValidationError("config: empty list for '" + key + "'");
    return out;
}

// windows = baseline:0;baseline_12m:0,12;baseline_24m:0,12,24
std::vector<WindowSpec> parse_windows(const std::string& value) {
    std::vector<WindowSpec> out;
    for (const auto& part : split(value, ';')) {
        std::string p = trim(part);
        if (p.empty()) continue;
        size_t colon = p.find(':');
        if (colon == std::string::npos)
            throw ValidationError("config: window '" + p + "' must be name:month,month,...");
        WindowSpec w;
        w.name = trim(p.substr(0, colon));
        w.months = parse_int_list("windows", p.substr(colon + 1));
        if (w.name.empty()) throw ValidationError("config: window with empty name");
        out.push_back(std::move(w));
    }
    if (out.empty()) throw ValidationError("config: windows list is empty");
    return out;
}

std::string group_key_name(const std::string& suffix) {
    if (suffix == "pdvec1") return "PDVec1";
    if (suffix == "pdvec2") return "PDVec2";
    if (suffix == "pdvec3") return "PDVec3";
    if (suffix == "hc") return "HC";
    throw ValidationError("config: unknown group '" + suffix + "' (expected pdvec1..3 or hc)");
}

}  // namespace

void apply_override(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "input") { cfg.input = value; return; }
    if (key == "out_dir") { cfg.out_dir = value; return; }
    if (key == "seed") {
        cfg.seed = static_cast<uint64_t>(parse_int_value(key, value));
        cfg.synth.seed = cfg.seed;
        return;
    }
    if (key == "schedule") {
        cfg.schedule = parse_int_list(key, value);
        cfg.synth.schedule = cfg.schedule;
        return;
    }
    if (key == "snap_window") { cfg.snap_window = static_cast<int>(parse_int_value(key, value)); return; }
    if (key == "drop_epsilon") { cfg.drop_epsilon = parse_double_value(key, value); return; }
    if (key == "normalize.method") { cfg.norm_method = normalization_from_string(value); return; }

    if (key == "dimred.method") { cfg.dimred_method = dimred_method_from_string(value); return; }
    if (key == "dimred.rank") { cfg.dimred_rank = static_cast<int>(parse_int_value(key, value)); return; }
    if (key == "dimred.max_iter") { cfg.dimred_max_iter = static_cast<int>(parse_int_value(key, value)); return; }
    if (key == "dimred.tol") { cfg.dimred_tol = parse_double_value(key, value); return; }
    if (key == "dimred.restarts") { cfg.dimred_restarts = static_cast<int>(parse_int_value(key, value)); return; }

    if (key == "gmm.k_min") { cfg.gmm_k_min = static_cast<int>(parse_int_value(key, value)); return; }
    if (key == "gmm.k_max") { cfg.gmm_k_max = static_cast<int>(parse_int_value(key, value)); return; }
    if (key == "gmm.max_iter") { cfg.gmm_max_iter = static_cast<int>(parse_int_value(key, value)); return; }
    if (key == "gmm.tol") { cfg.gmm_tol = parse_double_value(key, value); return; }
    if (key == "gmm.n_init") { cfg.gmm_n_init = static_cast<int>(parse_int_value(key, value)); return; }
    if (key == "gmm.reg_floor") { cfg.gmm_reg_floor = parse_double_value(key, value); return; }
    if (key == "gmm.use_2d") { cfg.gmm_use_2d = parse_bool_value(key, value); return; }

    if (key == "forest.n_trees") { cfg.forest.n_trees = static_cast<int>(parse_int_value(key, value)); return; }
    if (key == "forest.max_depth") { cfg.forest.max_depth = static_cast<int>(parse_int_value(key, value)); return; }
    if (key == "forest.min_samples_leaf") { cfg.forest.min_samples_leaf = static_cast<int>(parse_int_value(key, value)); return; }
    if (key == "forest.mtry") { cfg.forest.mtry = static_cast<int>(parse_int_value(key, value)); return; }
    if (key == "forest.bootstrap") { cfg.forest.bootstrap = parse_bool_value(key, value); return; }
    if (key == "forest.window") { cfg.forest_window = value; return; }

    if (key == "cv.k") { cfg.cv_k = static_cast<int>(parse_int_value(key, value)); return; }
    if (key == "windows") { cfg.windows = parse_windows(value); return; }

    if (key == "synth.n_pdvec1") { cfg.synth.n_pdvec1 = static_cast<int>(parse_int_value(key, value)); return; }
    if (key == "synth.n_pdvec2") { cfg.synth.n_pdvec2 = static_cast<int>(parse_int_value(key, value)); return; }
    if (key == "synth.n_pdvec3") { cfg.synth.n_pdvec3 = static_cast<int>(parse_int_value(key, value)); return; }
    if (key == "synth.n_hc") { cfg.synth.n_hc = static_cast<int>(parse_int_value(key, value)); return; }
    if (key == "synth.dimensions") { cfg.synth.dimensions = parse_string_list(key, value); return; }
    if (key == "synth.codes_per_dimension") { cfg.synth.codes_per_dimension = static_cast<int>(parse_int_value(key, value)); return; }
    if (key == "synth.noise_std") { cfg.synth.noise_std = parse_double_value(key, value); return; }
    if (key == "synth.velocity_jitter_scale") { cfg.synth.velocity_jitter_scale = parse_double_value(key, value); return; }
    if (key == "synth.baseline_jitter_scale") { cfg.synth.baseline_jitter_scale = parse_double_value(key, value); return; }
    if (key == "synth.missing_rate") { cfg.synth.missing_rate = parse_double_value(key, value); return; }

    if (key.rfind("synth.velocity.", 0) == 0) {
        cfg.synth.velocity_means[group_key_name(key.substr(15))] = parse_double_list(key, value);
        return;
    }
    if (key.rfind("synth.baseline.", 0) == 0) {
        cfg.synth.baseline_means[group_key_name(key.substr(15))] = parse_double_list(key, value);
        return;
    }
    if (key.rfind("family.", 0) == 0) {
        std::string code = key.substr(7);
        if (code.empty()) throw ValidationError("config: family mapping with empty code");
        cfg.code_families[code] = value;
        return;
    }

    throw ValidationError("config: unknown key '" + key + "'");
}

PipelineConfig parse_config(std::istream& stream) {
    PipelineConfig cfg;
    cfg.synth.seed = cfg.seed;
    cfg.synth.schedule = cfg.schedule;

    std::string line;
    int line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::string t = trim(line);
        if (t.empty()) continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(line_no) +
                                  ": expected key = value, got '" + t + "'");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ValidationError("config line " + std::to_string(line_no) + ": empty key");
        try {
            apply_override(cfg, key, value);
        } catch (const ValidationError& e) {
            throw ValidationError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file '" + path + "'");
    return parse_config(is);
}

}  // namespace pdprog
