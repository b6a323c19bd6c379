#include "sbtrpo/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "sbtrpo/config.hpp"
#include "sbtrpo/envs.hpp"
#include "sbtrpo/trainer.hpp"

namespace sbtrpo {

namespace {

namespace fs = std::filesystem;

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void apply_env_seed_override(TrainConfig& cfg) {
    if (const char* s = std::getenv("SBTRPO_SEED")) {
        try {
            cfg.seed = static_cast<uint64_t>(std::stoll(s));
        } catch (const std::exception&) {
            throw ConfigError("SBTRPO_SEED is not an integer: " + std::string(s));
        }
    }
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    if (out.empty()) throw ConfigError("expected a non-empty comma-separated list: " + text);
    return out;
}

// Accepts "a..b" ranges and comma lists.
std::vector<uint64_t> parse_seed_list(const std::string& text) {
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
        const long long lo = std::stoll(text.substr(0, dots));
        const long long hi = std::stoll(text.substr(dots + 2));
        if (hi < lo) throw ConfigError("empty seed range: " + text);
        std::vector<uint64_t> out;
        for (long long s = lo; s <= hi; ++s) out.push_back(static_cast<uint64_t>(s));
        return out;
    }
    std::vector<uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(static_cast<uint64_t>(std::stoll(item)));
    }
    if (out.empty()) throw ConfigError("expected seeds: " + text);
    return out;
}

struct RunSummary {
    int epochs = 0;
    int accepted_epochs = 0;
    double mean_reward = 0.0;
    double mean_cost = 0.0;
    double safety_prob = 0.0;
    double safe_reward = 0.0;
};

RunSummary summarize(const RunLog& log) {
    RunSummary s;
    s.epochs = static_cast<int>(log.reports.size());
    for (const auto& r : log.reports) s.accepted_epochs += r.accepted;
    if (!log.reports.empty()) {
        const StepReport& last = log.reports.back();
        s.mean_reward = last.mean_reward;
        s.mean_cost = last.mean_cost;
        s.safety_prob = last.safety_probability;
        s.safe_reward = last.safe_reward;
    }
    return s;
}

void write_summary(const fs::path& path, const RunSummary& s) {
    std::ofstream out(path);
    if (!out) throw RunError("cannot write summary file: " + path.string());
    out << "epochs = " << s.epochs << '\n'
        << "accepted_epochs = " << s.accepted_epochs << '\n'
        << "final_mean_reward = " << fmt(s.mean_reward) << '\n'
        << "final_mean_cost = " << fmt(s.mean_cost) << '\n'
        << "final_safety_prob = " << fmt(s.safety_prob) << '\n'
        << "final_safe_reward = " << fmt(s.safe_reward) << '\n';
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            const std::string& out_dir) {
    TrainConfig cfg = parse_config(config_path, overrides);
    apply_env_seed_override(cfg);
    fs::create_directories(out_dir);
    cfg.log_path = (fs::path(out_dir) / "log.csv").string();
    const RunLog log = train(cfg);
    write_summary(fs::path(out_dir) / "summary.txt", summarize(log));
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& beta_text, const std::string& seeds_text,
              const std::string& out_dir) {
    const std::vector<double> betas = parse_double_list(beta_text);
    const std::vector<uint64_t> seeds = parse_seed_list(seeds_text);
    fs::create_directories(out_dir);

    struct Row {
        double beta;
        uint64_t seed;
        RunSummary summary;
    };
    std::vector<Row> rows;
    for (const double beta : betas) {
        for (const uint64_t seed : seeds) {
            TrainConfig cfg = parse_config(config_path, overrides);
            apply_env_seed_override(cfg);
            cfg.trust.beta = beta;
            cfg.seed = seed;
            std::ostringstream tag;
            tag << "run_beta" << beta << "_seed" << seed;
            cfg.log_path = (fs::path(out_dir) / (tag.str() + ".csv")).string();
            const RunLog log = train(cfg);
            const RunSummary s = summarize(log);
            write_summary(fs::path(out_dir) / (tag.str() + "_summary.txt"), s);
            rows.push_back({beta, seed, s});
        }
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return a.beta != b.beta ? a.beta < b.beta : a.seed < b.seed;
    });

    std::ofstream table(fs::path(out_dir) / "sweep.csv");
    if (!table) throw RunError("cannot write sweep table");
    table << "beta,seed,final_safety_prob,final_safe_reward\n";
    for (const auto& row : rows)
        table << fmt(row.beta) << ',' << row.seed << ',' << fmt(row.summary.safety_prob) << ','
              << fmt(row.summary.safe_reward) << '\n';
    return 0;
}

int cmd_diagnose(const std::string& log_path, const std::string& out_dir) {
    std::ifstream in(log_path);
    if (!in) throw RunError("cannot open log file: " + log_path);
    std::string header;
    if (!std::getline(in, header)) throw RunError("empty log file: " + log_path);

    std::vector<std::string> cols;
    std::stringstream hs(header);
    std::string col;
    while (std::getline(hs, col, ',')) cols.push_back(col);
    int idx_r = -1, idx_c = -1;
    for (size_t i = 0; i < cols.size(); ++i) {
        if (cols[i] == "angle_gr_deg") idx_r = static_cast<int>(i);
        if (cols[i] == "angle_gc_deg") idx_c = static_cast<int>(i);
    }
    if (idx_r < 0 || idx_c < 0) throw RunError("log file lacks angle columns: " + log_path);

    constexpr int kBins = 36;  // 0..180 degrees in 5-degree bins
    std::vector<long> hist_r(kBins, 0), hist_c(kBins, 0);
    auto tally = [](std::vector<long>& hist, const std::string& cell) {
        if (cell.empty()) return;  // undefined angle
        const double deg = std::stod(cell);
        int bin = static_cast<int>(deg / 5.0);
        bin = std::clamp(bin, 0, kBins - 1);
        ++hist[bin];
    };

    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        while (static_cast<int>(cells.size()) <= std::max(idx_r, idx_c)) cells.emplace_back();
        tally(hist_r, cells[idx_r]);
        tally(hist_c, cells[idx_c]);
    }

    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "angle_histogram.csv");
    if (!out) throw RunError("cannot write angle histogram");
    out << "bin_lo_deg,bin_hi_deg,count_gr,count_gc\n";
    for (int b = 0; b < kBins; ++b)
        out << b * 5 << ',' << (b + 1) * 5 << ',' << hist_r[b] << ',' << hist_c[b] << '\n';
    return 0;
}

int cmd_oracle(const std::string& config_path, const std::vector<std::string>& overrides) {
    TrainConfig cfg = parse_config(config_path, overrides);
    if (cfg.env_name != "hazard_grid") {
        std::cerr << "oracle: exact oracles exist only for tabular environments\n";
        return 3;
    }
    const GridLayout layout = cfg.layout_path.empty() ? parse_grid(kDefaultHazardGrid)
                                                      : load_grid_file(cfg.layout_path);
    const TabularCMDP cmdp = make_hazard_cmdp(layout, cfg.gamma);
    const SafeOptimum opt = constrained_optimum_oracle(cmdp);
    const PolicyEvalResult eval = exact_policy_eval(cmdp, opt.policy_table);
    std::cout << "safe_optimal_j_r = " << fmt(opt.j_r) << '\n'
              << "safe_optimal_j_c = " << fmt(eval.j_c) << '\n';
    return 0;
}

} // namespace

int cli_main(const std::vector<std::string>& args) {
    CLI::App app{"SB-TRPO: safety-biased trust-region policy optimization"};
    app.require_subcommand(1);

    std::string config_path, out_dir, log_path, beta_text, seeds_text;
    std::vector<std::string> overrides;

    CLI::App* run = app.add_subcommand("run", "train one configuration");
    run->add_option("--config", config_path, "config file")->required();
    run->add_option("--set", overrides, "key=value overrides");
    run->add_option("--out", out_dir, "output directory")->required();

    CLI::App* sweep = app.add_subcommand("sweep", "train a grid of (beta, seed) pairs");
    sweep->add_option("--config", config_path, "config file")->required();
    sweep->add_option("--set", overrides, "key=value overrides");
    sweep->add_option("--beta", beta_text, "comma-separated safety-bias values")->required();
    sweep->add_option("--seeds", seeds_text, "seed list: a..b or comma-separated")->required();
    sweep->add_option("--out", out_dir, "output directory")->required();

    CLI::App* diagnose = app.add_subcommand("diagnose", "angle histograms from a run log");
    diagnose->add_option("--log", log_path, "run log CSV")->required();
    diagnose->add_option("--out", out_dir, "output directory")->required();

    CLI::App* oracle = app.add_subcommand("oracle", "exact safe optimum for tabular envs");
    oracle->add_option("--config", config_path, "config file")->required();
    oracle->add_option("--set", overrides, "key=value overrides");

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::ParseError& e) {
        std::cerr << (e.get_exit_code() == 0 ? "" : "error: ") << e.what() << '\n';
        return e.get_exit_code() == 0 ? 0 : 3;
    }

    try {
        if (*run) return cmd_run(config_path, overrides, out_dir);
        if (*sweep) return cmd_sweep(config_path, overrides, beta_text, seeds_text, out_dir);
        if (*diagnose) return cmd_diagnose(log_path, out_dir);
        if (*oracle) return cmd_oracle(config_path, overrides);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 3;
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 3;
}

} // namespace sbtrpo
