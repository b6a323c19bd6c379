#include "sbtrpo/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace sbtrpo {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("bad value for key " + key + ": expected a number, got '" + v + "'");
    }
}

long long to_int(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const long long x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("bad value for key " + key + ": expected an integer, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("bad value for key " + key + ": expected true/false, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError("bad value for key " + key + ": empty list entry");
        out.push_back(static_cast<int>(to_int(key, item)));
    }
    if (out.empty()) throw ConfigError("bad value for key " + key + ": empty list");
    return out;
}

std::string from_int_list(const std::vector<int>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

struct KeyEntry {
    std::function<void(TrainConfig&, const std::string&)> set;
    std::function<std::string(const TrainConfig&)> get;
};

const std::vector<std::pair<std::string, KeyEntry>>& key_table() {
    static const std::vector<std::pair<std::string, KeyEntry>> table = {
        {"env",
         {[](TrainConfig& c, const std::string& v) { c.env_name = v; },
          [](const TrainConfig& c) { return c.env_name; }}},
        {"layout",
         {[](TrainConfig& c, const std::string& v) { c.layout_path = v; },
          [](const TrainConfig& c) { return c.layout_path; }}},
        {"hidden",
         {[](TrainConfig& c, const std::string& v) { c.hidden_sizes = to_int_list("hidden", v); },
          [](const TrainConfig& c) { return from_int_list(c.hidden_sizes); }}},
        {"gamma",
         {[](TrainConfig& c, const std::string& v) { c.gamma = to_double("gamma", v); },
          [](const TrainConfig& c) { return fmt(c.gamma); }}},
        {"target_kl",
         {[](TrainConfig& c, const std::string& v) { c.trust.eps_kl = to_double("target_kl", v); },
          [](const TrainConfig& c) { return fmt(c.trust.eps_kl); }}},
        {"beta",
         {[](TrainConfig& c, const std::string& v) { c.trust.beta = to_double("beta", v); },
          [](const TrainConfig& c) { return fmt(c.trust.beta); }}},
        {"cg_iters",
         {[](TrainConfig& c, const std::string& v) {
              c.trust.cg_iters = static_cast<int>(to_int("cg_iters", v));
          },
          [](const TrainConfig& c) { return std::to_string(c.trust.cg_iters); }}},
        {"cg_tol",
         {[](TrainConfig& c, const std::string& v) { c.trust.cg_tol = to_double("cg_tol", v); },
          [](const TrainConfig& c) { return fmt(c.trust.cg_tol); }}},
        {"tikhonov",
         {[](TrainConfig& c, const std::string& v) { c.trust.tikhonov = to_double("tikhonov", v); },
          [](const TrainConfig& c) { return fmt(c.trust.tikhonov); }}},
        {"step_fraction",
         {[](TrainConfig& c, const std::string& v) {
              c.trust.step_fraction = to_double("step_fraction", v);
          },
          [](const TrainConfig& c) { return fmt(c.trust.step_fraction); }}},
        {"max_backtracks",
         {[](TrainConfig& c, const std::string& v) {
              c.trust.max_backtracks = static_cast<int>(to_int("max_backtracks", v));
          },
          [](const TrainConfig& c) { return std::to_string(c.trust.max_backtracks); }}},
        {"epochs",
         {[](TrainConfig& c, const std::string& v) { c.epochs = static_cast<int>(to_int("epochs", v)); },
          [](const TrainConfig& c) { return std::to_string(c.epochs); }}},
        {"steps_per_epoch",
         {[](TrainConfig& c, const std::string& v) {
              c.steps_per_epoch = static_cast<int>(to_int("steps_per_epoch", v));
          },
          [](const TrainConfig& c) { return std::to_string(c.steps_per_epoch); }}},
        {"n_envs",
         {[](TrainConfig& c, const std::string& v) { c.n_envs = static_cast<int>(to_int("n_envs", v)); },
          [](const TrainConfig& c) { return std::to_string(c.n_envs); }}},
        {"seed",
         {[](TrainConfig& c, const std::string& v) {
              c.seed = static_cast<uint64_t>(to_int("seed", v));
          },
          [](const TrainConfig& c) { return std::to_string(c.seed); }}},
        {"whiten_reward_adv",
         {[](TrainConfig& c, const std::string& v) {
              c.whiten_reward_adv = to_bool("whiten_reward_adv", v);
          },
          [](const TrainConfig& c) { return c.whiten_reward_adv ? "true" : "false"; }}},
        {"log_path",
         {[](TrainConfig& c, const std::string& v) { c.log_path = v; },
          [](const TrainConfig& c) { return c.log_path; }}},
    };
    return table;
}

void set_key(TrainConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& [name, entry] : key_table()) {
        if (name == key) {
            entry.set(cfg, value);
            return;
        }
    }
    throw ConfigError("unknown key: " + key);
}

} // namespace

void apply_override(TrainConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override must look like key=value: " + assignment);
    set_key(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

TrainConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        set_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    for (const auto& ov : overrides) apply_override(cfg, ov);
    return cfg;
}

TrainConfig parse_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), overrides);
}

std::string write_config(const TrainConfig& cfg) {
    std::string out;
    for (const auto& [name, entry] : key_table()) {
        out += name;
        out += " = ";
        out += entry.get(cfg);
        out += '\n';
    }
    return out;
}

} // namespace sbtrpo
