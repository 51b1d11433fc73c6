#pragma once

// Experiment runner. Every episode draws one instance from a seed derived
// from the master seed, runs the SmartChoice variant on it, then runs each
// baseline on the same instance and records the costs.
//
// Costs: binary search = probes, QuickSort = weighted reads/writes/compares,
// caches = misses.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "smartchoices/env/cache.hpp"
#include "smartchoices/env/quicksort.hpp"
#include "smartchoices/env/search.hpp"
#include "smartchoices/errors.hpp"
#include "smartchoices/harness/config.hpp"
#include "smartchoices/random.hpp"
#include "smartchoices/smart_choice.hpp"

namespace smartchoices::harness {

struct BaselineCost {
    std::string name;
    double cost = 0.0;
};

struct EpisodeRecord {
    std::size_t episode = 0;  ///< 1-based
    std::uint64_t seed = 0;   ///< instance seed
    std::string variant;
    double choice_cost = 0.0;
    std::vector<BaselineCost> baselines;
    double episode_return = 0.0;
    PolicyTag policy_tag = PolicyTag::initial;
    double p_learned = 0.0;
    double usage_rate = 0.0;
};

inline std::vector<std::string> default_baselines(const std::string& problem) {
    if (problem == "bsearch") return {"vanilla"};
    if (problem == "quicksort") return {"adaptive"};
    if (problem == "cache") return {"lru"};
    throw ConfigError("unknown problem '" + problem + "'");
}

inline std::vector<std::string> known_baselines(const std::string& problem) {
    if (problem == "bsearch") return {"vanilla", "interpolation"};
    if (problem == "quicksort") return {"vanilla", "random3", "random9", "adaptive"};
    if (problem == "cache") return {"lru", "oracle"};
    throw ConfigError("unknown problem '" + problem + "'");
}

class Experiment {
public:
    explicit Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.baselines.empty()) cfg_.baselines = default_baselines(cfg_.problem);
        const auto known = known_baselines(cfg_.problem);
        for (const auto& b : cfg_.baselines)
            if (std::find(known.begin(), known.end(), b) == known.end())
                throw ConfigError("unknown " + cfg_.problem + " baseline '" + b + "'");
        if (cfg_.usage_window == 0) throw ConfigError("usage_window must be >= 1");
        cfg_.learner.seed = derive_seed(cfg_.seed, 0x1ea7);
        cfg_.learner.validate();

        if (cfg_.problem == "bsearch") {
            search_variant_ = env::parse_search_variant(cfg_.variant);
            if (cfg_.search_size == 0) throw ConfigError("search_size must be positive");
            choice_ = env::make_search_choice(search_variant_, cfg_.learner, cfg_.selector);
        } else if (cfg_.problem == "quicksort") {
            if (cfg_.variant != "samples") throw ConfigError("unknown QuickSort variant '" + cfg_.variant + "'");
            if (cfg_.sort_min_size < 2 || cfg_.sort_max_size < cfg_.sort_min_size)
                throw ConfigError("sort sizes need 2 <= sort_min_size <= sort_max_size");
            choice_ = env::make_sort_choice(cfg_.learner, cfg_.selector, cfg_.sort_max_size);
        } else if (cfg_.problem == "cache") {
            cache_variant_ = env::parse_cache_variant(cfg_.variant);
            cache_opts_ = {cfg_.cache_capacity, cfg_.cache_keys, cfg_.cache_scale, cfg_.cache_window};
            if (cache_opts_.capacity == 0 || cache_opts_.key_count == 0 || cache_opts_.window == 0)
                throw ConfigError("cache capacity, keys and window must be positive");
            choice_ = env::make_cache_choice(cache_variant_, cache_opts_, cfg_.learner, cfg_.selector);
        } else {
            throw ConfigError("unknown problem '" + cfg_.problem + "'");
        }
    }

    /// Runs the next episode.
    EpisodeRecord step() {
        ++episode_;
        EpisodeRecord rec;
        rec.episode = episode_;
        rec.seed = derive_seed(cfg_.seed, episode_);
        rec.variant = cfg_.variant;

        std::optional<double> score;
        if (cfg_.problem == "bsearch") {
            const auto inst = env::make_search_instance(rec.seed, cfg_.search_size);
            rec.choice_cost = static_cast<double>(env::run_search(inst, *choice_, search_variant_));
            for (const auto& b : cfg_.baselines) {
                const auto steps = b == "vanilla" ? env::vanilla_search_steps(inst) : env::interpolation_search_steps(inst);
                rec.baselines.push_back({b, static_cast<double>(steps)});
            }
        } else if (cfg_.problem == "quicksort") {
            const auto inst = env::make_sort_instance(rec.seed, cfg_.sort_min_size, cfg_.sort_max_size);
            auto a = inst.array;
            auto model = cost_model();
            Rng rng(derive_seed(rec.seed, 1));
            rec.choice_cost = env::qsort_choice(a, *choice_, model, rng).cost;
            if (!std::is_sorted(a.begin(), a.end())) throw std::logic_error("QuickSort produced an unsorted array");
            // Size-free score for the policy selector; returns grow with n.
            const auto n = static_cast<double>(a.size());
            score = -rec.choice_cost / (n * std::log2(n));
            for (const auto& b : cfg_.baselines)
                rec.baselines.push_back({b, env::qsort_baseline(inst, env::parse_sort_baseline(b),
                                                                derive_seed(rec.seed, 2), cost_model())});
        } else {
            const auto trace = env::make_access_trace(rec.seed, cfg_.cache_alpha, cfg_.cache_trace_length,
                                                      cfg_.cache_keys);
            rec.choice_cost = static_cast<double>(env::run_cache(trace, *choice_, cache_variant_, cache_opts_).misses);
            for (const auto& b : cfg_.baselines) {
                const auto st = b == "lru" ? env::lru_simulate(trace.keys, cfg_.cache_capacity)
                                           : env::oracle_simulate(trace.keys, cfg_.cache_capacity);
                rec.baselines.push_back({b, static_cast<double>(st.misses)});
            }
        }

        rec.policy_tag = choice_->episode_policy().value_or(PolicyTag::initial);
        rec.episode_return = choice_->end_episode(score).value_or(0.0);
        rec.p_learned = choice_->selector().p_learned();
        rec.usage_rate = choice_->selector().usage_rate(cfg_.usage_window);
        return rec;
    }

    std::size_t episode() const { return episode_; }
    const ExperimentConfig& config() const { return cfg_; }
    SmartChoice& choice() { return *choice_; }

private:
    env::SortCostModel cost_model() const {
        env::SortCostModel m;
        m.read_weight = cfg_.sort_read_weight;
        m.write_weight = cfg_.sort_write_weight;
        m.compare_weight = cfg_.sort_compare_weight;
        return m;
    }

    ExperimentConfig cfg_;
    std::unique_ptr<SmartChoice> choice_;
    env::SearchVariant search_variant_ = env::SearchVariant::mix;
    env::CacheVariant cache_variant_ = env::CacheVariant::continuous;
    env::CacheOptions cache_opts_;
    std::size_t episode_ = 0;
};

/// Runs cfg.episodes episodes, handing each record to `sink`.
inline void run_experiment(const ExperimentConfig& cfg, const std::function<void(const EpisodeRecord&)>& sink) {
    Experiment ex(cfg);
    for (std::size_t e = 0; e < cfg.episodes; ++e) sink(ex.step());
}

inline std::vector<EpisodeRecord> run_experiment(const ExperimentConfig& cfg) {
    std::vector<EpisodeRecord> out;
    out.reserve(cfg.episodes);
    run_experiment(cfg, [&](const EpisodeRecord& r) { out.push_back(r); });
    return out;
}

inline const char* kCsvHeader =
    "episode,seed,variant,choice_cost,baseline,baseline_cost,regret,cum_regret,policy_tag,p_learned,usage_rate";

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

/// One CSV row per (episode, baseline); keeps the running regret per baseline.
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(&os) { *os_ << kCsvHeader << '\n'; }

    void write(const EpisodeRecord& r) {
        if (cum_.size() < r.baselines.size()) cum_.resize(r.baselines.size(), 0.0);
        for (std::size_t i = 0; i < r.baselines.size(); ++i) {
            const auto& b = r.baselines[i];
            const double regret = r.choice_cost - b.cost;
            cum_[i] += regret;
            *os_ << r.episode << ',' << r.seed << ',' << r.variant << ',' << format_number(r.choice_cost) << ','
                 << b.name << ',' << format_number(b.cost) << ',' << format_number(regret) << ','
                 << format_number(cum_[i]) << ',' << to_string(r.policy_tag) << ',' << format_number(r.p_learned)
                 << ',' << format_number(r.usage_rate) << '\n';
        }
    }

private:
    std::ostream* os_;
    std::vector<double> cum_;
};

}  // namespace smartchoices::harness
