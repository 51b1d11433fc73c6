#pragma once

// Flat "key = value" experiment configuration. '#' starts a comment, blank
// lines are ignored and unknown keys are errors. Keys are listed by
// config_keys(); their names match the fields below.

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "smartchoices/errors.hpp"
#include "smartchoices/learner.hpp"
#include "smartchoices/policy_selector.hpp"

namespace smartchoices::harness {

struct ExperimentConfig {
    std::string problem = "bsearch";  ///< bsearch | quicksort | cache
    std::string variant = "mix";
    std::size_t episodes = 1000;
    std::uint64_t seed = 1;
    std::vector<std::string> baselines;  ///< empty: the problem's default baseline
    std::size_t usage_window = 100;

    LearnerConfig learner;
    SelectorConfig selector;

    // binary search
    std::size_t search_size = 5000;

    // QuickSort
    std::size_t sort_min_size = 16;
    std::size_t sort_max_size = 1024;
    double sort_read_weight = 1.0;
    double sort_write_weight = 1.0;
    double sort_compare_weight = 1.0;

    // caches
    double cache_alpha = 0.5;
    std::size_t cache_capacity = 10;
    std::size_t cache_keys = 100;
    std::size_t cache_trace_length = 1000;
    double cache_scale = 1.0;
    std::size_t cache_window = 100;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    std::istringstream is(v);
    T out{};
    is >> out;
    if (is.fail() || !is.eof()) throw ConfigError("bad value for '" + key + "': '" + v + "'");
    if constexpr (std::is_unsigned_v<T>) {
        if (!v.empty() && v[0] == '-') throw ConfigError("'" + key + "' must be non-negative");
    }
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw ConfigError("bad boolean for '" + key + "': '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(v);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

template <class T, class F>
Setter number(F field) {
    return [field](ExperimentConfig& c, const std::string& k, const std::string& v) {
        field(c) = parse_number<T>(k, v);
    };
}

inline const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        t["problem"] = [](auto& c, auto&, auto& v) { c.problem = v; };
        t["variant"] = [](auto& c, auto&, auto& v) { c.variant = v; };
        t["episodes"] = number<std::size_t>([](auto& c) -> auto& { return c.episodes; });
        t["seed"] = number<std::uint64_t>([](auto& c) -> auto& { return c.seed; });
        t["baselines"] = [](auto& c, auto&, auto& v) { c.baselines = split_list(v); };
        t["usage_window"] = number<std::size_t>([](auto& c) -> auto& { return c.usage_window; });

        t["algorithm"] = [](auto& c, auto& k, auto& v) {
            if (v == "ddqn") c.learner.algorithm = Algorithm::ddqn;
            else if (v == "td3") c.learner.algorithm = Algorithm::td3;
            else throw ConfigError("bad value for '" + k + "': '" + v + "'");
        };
        t["discount"] = number<double>([](auto& c) -> auto& { return c.learner.discount; });
        t["lr_actor"] = number<double>([](auto& c) -> auto& { return c.learner.lr_actor; });
        t["lr_critic"] = number<double>([](auto& c) -> auto& { return c.learner.lr_critic; });
        t["batch_size"] = number<std::size_t>([](auto& c) -> auto& { return c.learner.batch_size; });
        t["tau"] = number<double>([](auto& c) -> auto& { return c.learner.tau; });
        t["action_noise"] = number<double>([](auto& c) -> auto& { return c.learner.action_noise; });
        t["target_noise"] = number<double>([](auto& c) -> auto& { return c.learner.target_noise; });
        t["temperature"] = number<double>([](auto& c) -> auto& { return c.learner.temperature; });
        t["update_period"] = number<std::size_t>([](auto& c) -> auto& { return c.learner.update_period; });
        t["actor_layers"] = [](auto& c, auto&, auto& v) { c.learner.actor_layers = v; };
        t["critic_layers"] = [](auto& c, auto&, auto& v) { c.learner.critic_layers = v; };
        t["embedding_size"] = number<std::size_t>([](auto& c) -> auto& { return c.learner.embedding_size; });
        t["buffer_capacity"] = number<std::size_t>([](auto& c) -> auto& { return c.learner.buffer_capacity; });
        t["grad_clip_norm"] = number<double>([](auto& c) -> auto& { return c.learner.grad_clip_norm; });
        t["actor_preact_l2"] = number<double>([](auto& c) -> auto& { return c.learner.actor_preact_l2; });
        t["optimistic_q"] = number<double>([](auto& c) -> auto& { return c.learner.optimistic_q; });
        t["updates_per_episode"] =
            number<std::size_t>([](auto& c) -> auto& { return c.learner.updates_per_episode; });

        t["ema_decay"] = number<double>([](auto& c) -> auto& { return c.selector.ema_decay; });
        t["margin_frac"] = number<double>([](auto& c) -> auto& { return c.selector.margin_frac; });
        t["margin_abs"] = number<double>([](auto& c) -> auto& { return c.selector.margin_abs; });
        t["step_up"] = number<double>([](auto& c) -> auto& { return c.selector.step_up; });
        t["step_down"] = number<double>([](auto& c) -> auto& { return c.selector.step_down; });
        t["p_min"] = number<double>([](auto& c) -> auto& { return c.selector.p_min; });
        t["decay_enabled"] = [](auto& c, auto& k, auto& v) { c.selector.decay_enabled = parse_bool(k, v); };
        t["decay_episodes"] = number<std::size_t>([](auto& c) -> auto& { return c.selector.decay_episodes; });

        t["search_size"] = number<std::size_t>([](auto& c) -> auto& { return c.search_size; });
        t["sort_min_size"] = number<std::size_t>([](auto& c) -> auto& { return c.sort_min_size; });
        t["sort_max_size"] = number<std::size_t>([](auto& c) -> auto& { return c.sort_max_size; });
        t["sort_read_weight"] = number<double>([](auto& c) -> auto& { return c.sort_read_weight; });
        t["sort_write_weight"] = number<double>([](auto& c) -> auto& { return c.sort_write_weight; });
        t["sort_compare_weight"] = number<double>([](auto& c) -> auto& { return c.sort_compare_weight; });
        t["cache_alpha"] = number<double>([](auto& c) -> auto& { return c.cache_alpha; });
        t["cache_capacity"] = number<std::size_t>([](auto& c) -> auto& { return c.cache_capacity; });
        t["cache_keys"] = number<std::size_t>([](auto& c) -> auto& { return c.cache_keys; });
        t["cache_trace_length"] = number<std::size_t>([](auto& c) -> auto& { return c.cache_trace_length; });
        t["cache_scale"] = number<double>([](auto& c) -> auto& { return c.cache_scale; });
        t["cache_window"] = number<std::size_t>([](auto& c) -> auto& { return c.cache_window; });
        return t;
    }();
    return table;
}

}  // namespace detail

inline std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& [k, _] : detail::setters()) out.push_back(k);
    return out;
}

inline void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    const auto& t = detail::setters();
    const auto it = t.find(key);
    if (it == t.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(cfg, key, value);
}

/// Applies every "key = value" line of `text` on top of `cfg`.
inline void apply_config_text(ExperimentConfig& cfg, const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        const auto key = detail::trim(line.substr(0, eq));
        const auto value = detail::trim(line.substr(eq + 1));
        try {
            set_config_value(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

inline ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    apply_config_text(cfg, text);
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

}  // namespace smartchoices::harness
