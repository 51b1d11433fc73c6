// smartchoices: run benchmark experiments and summarize their regret.
//
//   smartchoices run --problem quicksort --variant samples --episodes 2000
//       --seed 3 --config configs/quicksort.conf --out run.csv
//   smartchoices report --inputs run*.csv --checkpoints 100,1000 --out report.csv

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "smartchoices/harness/config.hpp"
#include "smartchoices/harness/experiment.hpp"
#include "smartchoices/harness/metrics.hpp"
#include "smartchoices/harness/report.hpp"

namespace sh = smartchoices::harness;

namespace {

int run_command(const std::string& config_path, const std::map<std::string, std::string>& flags,
                const std::vector<std::string>& overrides, const std::string& out_path, bool quiet) {
    sh::ExperimentConfig cfg = config_path.empty() ? sh::ExperimentConfig{} : sh::load_config(config_path);
    for (const auto& [k, v] : flags) sh::set_config_value(cfg, k, v);
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw smartchoices::ConfigError("--set expects key=value, got '" + o + "'");
        sh::set_config_value(cfg, sh::detail::trim(o.substr(0, eq)), sh::detail::trim(o.substr(eq + 1)));
    }

    std::ofstream file;
    std::ostream* os = &std::cout;
    if (!out_path.empty() && out_path != "-") {
        file.open(out_path);
        if (!file) throw smartchoices::ConfigError("cannot write '" + out_path + "'");
        os = &file;
    }
    sh::CsvWriter csv(*os);
    std::vector<double> cum;
    const std::size_t every = std::max<std::size_t>(1, cfg.episodes / 10);
    sh::run_experiment(cfg, [&](const sh::EpisodeRecord& r) {
        csv.write(r);
        if (cum.empty()) cum.assign(r.baselines.size(), 0.0);
        for (std::size_t i = 0; i < r.baselines.size(); ++i) cum[i] += r.choice_cost - r.baselines[i].cost;
        if (!quiet && (r.episode % every == 0 || r.episode == cfg.episodes)) {
            std::cerr << "episode " << r.episode << "  p_learned " << r.p_learned;
            for (std::size_t i = 0; i < cum.size(); ++i)
                std::cerr << "  " << r.baselines[i].name << " regret/ep " << cum[i] / static_cast<double>(r.episode);
            std::cerr << '\n';
        }
    });
    return 0;
}

int report_command(const std::vector<std::string>& inputs, const std::string& checkpoints_text,
                   const std::string& out_path, bool per_episode) {
    std::vector<std::size_t> checkpoints;
    std::stringstream ss(checkpoints_text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        checkpoints.push_back(std::stoul(item));
    }
    std::map<std::string, std::vector<std::vector<double>>> runs;
    for (const auto& path : inputs)
        for (auto& [baseline, series] : sh::read_regret_csv(path)) runs[baseline].push_back(std::move(series));

    std::ofstream file;
    std::ostream* os = &std::cout;
    if (!out_path.empty() && out_path != "-") {
        file.open(out_path);
        if (!file) throw smartchoices::ConfigError("cannot write '" + out_path + "'");
        os = &file;
    }
    bool header = true;
    for (const auto& [baseline, series] : runs) {
        sh::write_report_csv(*os, baseline, sh::quantile_report(series, checkpoints, sh::kTableQuantiles, per_episode),
                             header);
        header = false;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SmartChoices benchmark harness"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run one experiment and write its per-episode CSV");
    std::string config_path, out_path = "-";
    std::map<std::string, std::string> flags;
    std::vector<std::string> overrides;
    bool quiet = false;
    run->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    for (const char* key : {"problem", "variant", "episodes", "seed"}) {
        run->add_option_function<std::string>(std::string("--") + key,
                                              [&flags, key](const std::string& v) { flags[key] = v; });
    }
    run->add_option("--set", overrides, "Extra config override, key=value (repeatable)");
    run->add_option("--out", out_path, "CSV path, '-' for stdout");
    run->add_flag("--quiet", quiet, "No progress lines on stderr");

    auto* report = app.add_subcommand("report", "Quantile report over runs");
    std::vector<std::string> inputs;
    std::string checkpoints = "1000", report_out = "-";
    bool per_episode = false;
    report->add_option("--inputs", inputs, "Run CSVs, one per seed")->required()->check(CLI::ExistingFile);
    report->add_option("--checkpoints", checkpoints, "Comma-separated episodes");
    report->add_option("--out", report_out, "Report CSV path, '-' for stdout");
    report->add_flag("--per-episode", per_episode, "Divide cumulative regret by the episode count");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return run_command(config_path, flags, overrides, out_path, quiet);
        return report_command(inputs, checkpoints, report_out, per_episode);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
