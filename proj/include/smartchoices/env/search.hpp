#pragma once

// Binary search with a SmartChoice choosing the probe position.
//
// Variants:
//   simple       q is the relative probe position, -1 per missed probe, no initial function
//   simple_init  as simple, initial function q = 0.5 (plain binary search)
//   shaped       q is the relative probe position, reward = range reduction ratio
//   mix          q mixes the bisection split with the interpolation split;
//                reward = log2(range reduction) - 1, initial function q = 1 (bisection)
//   mix_simple   as mix but -1 per missed probe
// Cost of an episode is the number of probes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "smartchoices/errors.hpp"
#include "smartchoices/random.hpp"
#include "smartchoices/smart_choice.hpp"

namespace smartchoices::env {

enum class Distribution { uniform, triangular, normal, pareto, power, gamma, chisquare };

inline constexpr std::array<Distribution, 7> kAllDistributions{
    Distribution::uniform, Distribution::triangular, Distribution::normal, Distribution::pareto,
    Distribution::power,   Distribution::gamma,      Distribution::chisquare};

inline const char* to_string(Distribution d) {
    switch (d) {
        case Distribution::uniform: return "uniform";
        case Distribution::triangular: return "triangular";
        case Distribution::normal: return "normal";
        case Distribution::pareto: return "pareto";
        case Distribution::power: return "power";
        case Distribution::gamma: return "gamma";
        case Distribution::chisquare: return "chisquare";
    }
    return "uniform";
}

inline double sample_distribution(Distribution d, Rng& rng) {
    switch (d) {
        case Distribution::uniform: return uniform01(rng);
        case Distribution::triangular: {
            // mode 0.5 on [0, 1]
            const double u = uniform01(rng);
            return u < 0.5 ? std::sqrt(0.5 * u) : 1.0 - std::sqrt(0.5 * (1.0 - u));
        }
        case Distribution::normal: return std::normal_distribution<double>(0.0, 1.0)(rng);
        case Distribution::pareto: {
            // Lomax with shape 2, tail clipped at its 99.9% quantile.
            constexpr double shape = 2.0;
            const double cap = std::pow(1e-3, -1.0 / shape) - 1.0;
            return std::min(cap, std::pow(1.0 - uniform01(rng), -1.0 / shape) - 1.0);
        }
        case Distribution::power: return std::pow(uniform01(rng), 1.0 / 0.5);
        case Distribution::gamma: return std::gamma_distribution<double>(2.0, 1.0)(rng);
        case Distribution::chisquare: return std::chi_squared_distribution<double>(3.0)(rng);
    }
    return 0.0;
}

struct SearchInstance {
    std::vector<double> array;  ///< sorted ascending
    double target = 0.0;
    std::size_t target_index = 0;
    Distribution distribution = Distribution::uniform;
};

inline constexpr double kSearchValueRange = 1e4;

/// Sorted array of `n` samples from `dist`, shifted and scaled onto
/// [-value_range, value_range], with a uniformly chosen element as target.
inline SearchInstance make_search_instance(std::uint64_t seed, std::size_t n, Distribution dist,
                                           double value_range = kSearchValueRange) {
    if (n == 0) throw ConfigError("search array size must be positive");
    Rng rng(seed);
    SearchInstance inst;
    inst.distribution = dist;
    inst.array.resize(n);
    for (auto& v : inst.array) v = sample_distribution(dist, rng);
    std::sort(inst.array.begin(), inst.array.end());
    const double lo = inst.array.front();
    const double hi = inst.array.back();
    for (auto& v : inst.array)
        v = hi > lo ? -value_range + 2.0 * value_range * (v - lo) / (hi - lo) : 0.0;
    inst.target_index = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    inst.target = inst.array[inst.target_index];
    return inst;
}

/// Instance whose distribution is itself drawn uniformly from all seven.
inline SearchInstance make_search_instance(std::uint64_t seed, std::size_t n = 5000) {
    Rng rng(derive_seed(seed, 0x5ea4c4));
    const auto d = kAllDistributions[std::uniform_int_distribution<std::size_t>(0, kAllDistributions.size() - 1)(rng)];
    return make_search_instance(seed, n, d);
}

/// Classic bisection; returns the number of probes.
inline std::size_t vanilla_search_steps(const SearchInstance& inst) {
    const auto& a = inst.array;
    std::int64_t l = 0, r = static_cast<std::int64_t>(a.size()) - 1;
    std::size_t steps = 0;
    while (l <= r) {
        const std::int64_t m = l + (r - l) / 2;
        ++steps;
        if (a[static_cast<std::size_t>(m)] == inst.target) return steps;
        if (a[static_cast<std::size_t>(m)] < inst.target) l = m + 1;
        else r = m - 1;
    }
    return steps;
}

/// Range-reduction reward (before / after), with the new range floored at 1.
inline double bsearch_shaped_reward(double left, double right, double next_left, double next_right) {
    const double before = right - left;
    const double after = std::max(1.0, next_right - next_left);
    return before / after;
}

/// Probe index mixing the bisection split (weight q) with the interpolation split.
inline std::int64_t bsearch_mix(double q, std::int64_t left, std::int64_t right, double a_left, double a_right,
                                double x) {
    const std::int64_t lv = left + (right - left) / 2;
    if (!(a_right > a_left)) return lv;
    const double li = ((a_right - x) * static_cast<double>(left) + (x - a_left) * static_cast<double>(right)) /
                      (a_right - a_left);
    const double mixed = q * static_cast<double>(lv) + (1.0 - q) * li;
    return std::clamp(static_cast<std::int64_t>(std::llround(mixed)), left, right);
}

/// Interpolation search (mix with q = 0); returns the number of probes.
inline std::size_t interpolation_search_steps(const SearchInstance& inst) {
    const auto& a = inst.array;
    std::int64_t l = 0, r = static_cast<std::int64_t>(a.size()) - 1;
    std::size_t steps = 0;
    while (l <= r) {
        const auto m = bsearch_mix(0.0, l, r, a[static_cast<std::size_t>(l)], a[static_cast<std::size_t>(r)], inst.target);
        ++steps;
        if (a[static_cast<std::size_t>(m)] == inst.target) return steps;
        if (a[static_cast<std::size_t>(m)] < inst.target) l = m + 1;
        else r = m - 1;
    }
    return steps;
}

enum class SearchVariant { simple, simple_init, shaped, mix, mix_simple };

inline SearchVariant parse_search_variant(const std::string& s) {
    if (s == "simple") return SearchVariant::simple;
    if (s == "simple_init") return SearchVariant::simple_init;
    if (s == "shaped") return SearchVariant::shaped;
    if (s == "mix") return SearchVariant::mix;
    if (s == "mix_simple") return SearchVariant::mix_simple;
    throw ConfigError("unknown binary search variant '" + s + "'");
}

inline bool is_mixing(SearchVariant v) { return v == SearchVariant::mix || v == SearchVariant::mix_simple; }

inline std::vector<ObservationDef> search_observations(SearchVariant v, double value_range = kSearchValueRange) {
    std::vector<ObservationDef> defs{ObservationDef::scalar("target", -value_range, value_range),
                                     ObservationDef::scalar("low", -value_range, value_range),
                                     ObservationDef::scalar("high", -value_range, value_range)};
    if (is_mixing(v)) {
        // Where the target sits between the boundary values, how much of the
        // array is left, and how dense the values are relative to the whole array.
        defs.push_back(ObservationDef::scalar("position", 0.0, 1.0));
        defs.push_back(ObservationDef::scalar("span", 0.0, 1.0));
        defs.push_back(ObservationDef::scalar("density", -4.0, 4.0));
    }
    return defs;
}

inline InitialFunction search_initial_function(SearchVariant v) {
    switch (v) {
        case SearchVariant::simple: return {};
        case SearchVariant::mix:
        case SearchVariant::mix_simple: return [](const State&) { return 1.0; };
        default: return [](const State&) { return 0.5; };
    }
}

inline std::unique_ptr<SmartChoice> make_search_choice(SearchVariant v, const LearnerConfig& cfg,
                                                       const SelectorConfig& sel = {}) {
    return std::make_unique<SmartChoice>(OutputDef::continuous(0.0, 1.0), search_observations(v),
                                         search_initial_function(v), cfg, sel);
}

/// Runs one search with `choice` deciding every probe. Does not end the episode.
/// Returns the number of probes.
inline std::size_t run_search(const SearchInstance& inst, SmartChoice& choice, SearchVariant v) {
    const auto& a = inst.array;
    const auto n = static_cast<std::int64_t>(a.size());
    const double x = inst.target;
    const double log_n = std::log2(static_cast<double>(std::max<std::int64_t>(n, 2)));
    const double global_density = (a.back() - a.front()) / static_cast<double>(n);
    std::int64_t l = 0, r = n - 1;
    std::size_t steps = 0;
    while (l <= r) {
        const double al = a[static_cast<std::size_t>(l)];
        const double ar = a[static_cast<std::size_t>(r)];
        choice.observe_many({{"target", x}, {"low", al}, {"high", ar}});
        if (is_mixing(v)) {
            const double width = static_cast<double>(r - l + 1);
            choice.observe("position", ar > al ? (x - al) / (ar - al) : 0.5);
            choice.observe("span", std::log2(width) / log_n);
            const double local = (ar - al) / width;
            choice.observe("density", global_density > 0.0 && local > 0.0 ? std::log10(local / global_density) : -4.0);
        }
        const double q = choice.predict();
        std::int64_t m = 0;
        if (is_mixing(v)) {
            m = bsearch_mix(q, l, r, al, ar, x);
        } else {
            const double qc = std::clamp(q, 0.0, 1.0);
            m = static_cast<std::int64_t>(std::floor(qc * static_cast<double>(l) + (1.0 - qc) * static_cast<double>(r)));
            m = std::clamp(m, l, r);
        }
        ++steps;
        const double am = a[static_cast<std::size_t>(m)];
        const std::int64_t before = r - l + 1;
        std::int64_t nl = l, nr = r;
        const bool found = am == x;
        if (!found) {
            if (am < x) nl = m + 1;
            else nr = m - 1;
        }
        const double after = found ? 0.0 : static_cast<double>(nr - nl + 1);
        switch (v) {
            case SearchVariant::simple:
            case SearchVariant::simple_init:
            case SearchVariant::mix_simple:
                if (!found) choice.feedback(-1.0);
                break;
            case SearchVariant::shaped:
                choice.feedback(bsearch_shaped_reward(0.0, static_cast<double>(before), 0.0, after));
                break;
            case SearchVariant::mix:
                choice.feedback(std::log2(bsearch_shaped_reward(0.0, static_cast<double>(before), 0.0, after)) - 1.0);
                break;
        }
        if (found) return steps;
        l = nl;
        r = nr;
    }
    return steps;
}

}  // namespace smartchoices::env
