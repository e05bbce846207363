#include "hflab/config.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace hflab {

namespace {

using nlohmann::json;

std::string join(const std::string& prefix, const std::string& key) { return prefix.empty() ? key : prefix + "." + key; }

const json* find(const json& obj, const std::string& key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double number(const json& obj, const std::string& key, const std::string& path, std::optional<double> fallback = {}) {
    const json* v = find(obj, key);
    if (!v) {
        if (fallback) return *fallback;
        throw ConfigError(join(path, key), "missing required number");
    }
    if (!v->is_number()) throw ConfigError(join(path, key), "expected a number");
    const double d = v->get<double>();
    if (!std::isfinite(d)) throw ConfigError(join(path, key), "must be finite");
    return d;
}

std::size_t count(const json& obj, const std::string& key, const std::string& path, std::optional<std::size_t> fallback = {}) {
    const json* v = find(obj, key);
    if (!v) {
        if (fallback) return *fallback;
        throw ConfigError(join(path, key), "missing required integer");
    }
    if (!v->is_number_integer() || v->get<long long>() < 0) throw ConfigError(join(path, key), "expected a non-negative integer");
    return v->get<std::size_t>();
}

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; });
        if (!known) throw ConfigError(join(path, it.key()), "unknown key");
    }
}

DensitySpec parse_density(const json& d, const std::string& base_dir) {
    const std::string path = "density";
    if (!d.is_object()) throw ConfigError(path, "expected an object");
    const json* fam = find(d, "family");
    if (!fam || !fam->is_string()) throw ConfigError(join(path, "family"), "missing family name");
    const std::string family = fam->get<std::string>();
    try {
        if (family == "gaussian") {
            reject_unknown(d, path, {"family", "variance"});
            return DensitySpec::gaussian(number(d, "variance", path, 1.0));
        }
        if (family == "uniform") {
            reject_unknown(d, path, {"family", "a", "b"});
            return DensitySpec::uniform(number(d, "a", path, -1.0), number(d, "b", path, 1.0));
        }
        if (family == "exponential") {
            reject_unknown(d, path, {"family", "rate"});
            return DensitySpec::exponential(number(d, "rate", path, 1.0));
        }
        if (family == "quartic") {
            reject_unknown(d, path, {"family", "beta"});
            return DensitySpec::quartic(number(d, "beta", path, 1.0));
        }
        if (family == "laplace") {
            reject_unknown(d, path, {"family", "scale"});
            return DensitySpec::laplace(number(d, "scale", path, 1.0));
        }
        if (family == "tabulated") {
            reject_unknown(d, path, {"family", "path"});
            const json* p = find(d, "path");
            if (!p || !p->is_string()) throw ConfigError(join(path, "path"), "missing CSV path");
            std::filesystem::path file = p->get<std::string>();
            if (file.is_relative()) file = std::filesystem::path(base_dir) / file;
            if (!std::filesystem::exists(file)) throw ConfigError(join(path, "path"), "file not found: " + file.string());
            return load_tabulated_csv(file.string());
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(path, e.what());
    }
    throw ConfigError(join(path, "family"), "unknown family '" + family + "'");
}

}  // namespace

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"spectrum", "flow", "transport", "localize", "gamma", "all"};
    return names;
}

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("<root>", "expected an object");
    reject_unknown(root, "", {"experiment", "density", "grid", "s_ladder", "K", "sde", "transport", "output_dir", "seed"});

    ExperimentConfig c;
    const json* exp = find(root, "experiment");
    if (!exp || !exp->is_string()) throw ConfigError("experiment", "missing experiment name");
    c.experiment = exp->get<std::string>();

    const json* dens = find(root, "density");
    if (!dens) throw ConfigError("density", "missing density");
    c.density = parse_density(*dens, base_dir);

    if (const json* g = find(root, "grid")) {
        if (!g->is_object()) throw ConfigError("grid", "expected an object");
        reject_unknown(*g, "grid", {"n", "eps_tail"});
        c.n = count(*g, "n", "grid", c.n);
        c.eps_tail = number(*g, "eps_tail", "grid", c.eps_tail);
    }
    if (const json* l = find(root, "s_ladder")) {
        if (!l->is_array()) throw ConfigError("s_ladder", "expected an array of numbers");
        c.s_ladder.clear();
        for (std::size_t i = 0; i < l->size(); ++i) {
            if (!(*l)[i].is_number()) throw ConfigError("s_ladder[" + std::to_string(i) + "]", "expected a number");
            c.s_ladder.push_back((*l)[i].get<double>());
        }
    }
    c.K = count(root, "K", "", c.K);

    c.sde.base = c.density;
    c.sde.T_end = 2.0;
    c.sde.dt = 2.0 / 256.0;
    if (const json* s = find(root, "sde")) {
        if (!s->is_object()) throw ConfigError("sde", "expected an object");
        reject_unknown(*s, "sde", {"T_end", "dt", "M", "seed", "grid_n"});
        c.sde.T_end = number(*s, "T_end", "sde", c.sde.T_end);
        c.sde.dt = number(*s, "dt", "sde", c.sde.dt);
        c.sde.M = count(*s, "M", "sde", c.sde.M);
        c.sde.seed = count(*s, "seed", "sde", c.sde.seed);
        c.sde.grid_n = count(*s, "grid_n", "sde", c.sde.grid_n);
    }
    if (find(root, "seed")) c.sde.seed = count(root, "seed", "", c.sde.seed);
    if (const json* t = find(root, "transport")) {
        if (!t->is_object()) throw ConfigError("transport", "expected an object");
        reject_unknown(*t, "transport", {"smoothing", "nodes", "steps"});
        c.transport.smoothing = number(*t, "smoothing", "transport", c.transport.smoothing);
        c.transport.nodes = count(*t, "nodes", "transport", c.transport.nodes);
        c.transport.steps = count(*t, "steps", "transport", c.transport.steps);
    }
    if (const json* o = find(root, "output_dir")) {
        if (!o->is_string()) throw ConfigError("output_dir", "expected a string");
        c.output_dir = o->get<std::string>();
    }
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot read " + path);
    std::ostringstream text;
    text << in.rdbuf();
    const std::string dir = std::filesystem::path(path).parent_path().string();
    return parse_config(text.str(), dir.empty() ? "." : dir);
}

void validate(const ExperimentConfig& c) {
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), c.experiment) == names.end())
        throw ConfigError("experiment", "unknown experiment '" + c.experiment + "'");
    if (c.n < 17 || ((c.n - 1) & (c.n - 2)) != 0) throw ConfigError("grid.n", "must be a power of two plus one (>= 17)");
    if (!(c.eps_tail > 0.0 && c.eps_tail < 0.1)) throw ConfigError("grid.eps_tail", "must lie in (0, 0.1)");
    if (c.s_ladder.empty()) throw ConfigError("s_ladder", "must not be empty");
    for (std::size_t i = 0; i < c.s_ladder.size(); ++i) {
        if (!std::isfinite(c.s_ladder[i]) || c.s_ladder[i] < 0.0)
            throw ConfigError("s_ladder[" + std::to_string(i) + "]", "must be finite and >= 0");
        if (i > 0 && !(c.s_ladder[i] > c.s_ladder[i - 1])) throw ConfigError("s_ladder", "s_ladder not increasing");
    }
    if (c.K < 1) throw ConfigError("K", "must be >= 1");
    if (!(c.transport.smoothing >= 0.0)) throw ConfigError("transport.smoothing", "must be >= 0");
    if (c.transport.nodes < 3) throw ConfigError("transport.nodes", "must be >= 3");
    if (c.transport.steps < 64) throw ConfigError("transport.steps", "must be >= 64");
    if (c.output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
    try {
        c.sde.validate();
    } catch (const std::invalid_argument& e) {
        const std::string what = e.what();
        const std::string key = what.find("dt") != std::string::npos  ? "sde.dt"
                                : what.find("M ") != std::string::npos ? "sde.M"
                                : what.find("T_end") != std::string::npos ? "sde.T_end"
                                                                         : "sde.grid_n";
        throw ConfigError(key, what);
    }
}

}  // namespace hflab
