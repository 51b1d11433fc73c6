#pragma once

// QuickSort whose pivot is the lower median of s sampled elements, with a
// SmartChoice picking k and s = min(1 + 2k, r - l).
//
// Each partition step on [l, r) is rewarded with 1 / max(dc, 1e-6) where
//   dc = (c_piv + a log2 a + b log2 b - 2 (n/2) log2(n/2)) / (n log2 n),
// a = m - l, b = r - m, n = a + b, and c_piv is the cost of selecting the
// pivot plus partitioning the range.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "smartchoices/errors.hpp"
#include "smartchoices/random.hpp"
#include "smartchoices/smart_choice.hpp"

namespace smartchoices::env {

struct SortInstance {
    std::vector<std::int64_t> array;
};

inline constexpr std::size_t kSortMinSize = 16;
inline constexpr std::size_t kSortMaxSize = 1024;

/// Shuffled permutation of 0..n-1.
inline SortInstance make_sort_instance(std::uint64_t seed, std::size_t n) {
    SortInstance inst;
    inst.array.resize(n);
    std::iota(inst.array.begin(), inst.array.end(), std::int64_t{0});
    Rng rng(seed);
    std::shuffle(inst.array.begin(), inst.array.end(), rng);
    return inst;
}

/// Size drawn log-uniformly from [min_size, max_size].
inline std::size_t sample_sort_size(Rng& rng, std::size_t min_size = kSortMinSize, std::size_t max_size = kSortMaxSize) {
    if (min_size < 2 || max_size < min_size) throw ConfigError("sort sizes need 2 <= min <= max");
    const double lo = std::log(static_cast<double>(min_size));
    const double hi = std::log(static_cast<double>(max_size) + 1.0);
    const auto n = static_cast<std::size_t>(std::exp(lo + (hi - lo) * uniform01(rng)));
    return std::clamp(n, min_size, max_size);
}

inline SortInstance make_sort_instance(std::uint64_t seed, std::size_t min_size, std::size_t max_size) {
    Rng rng(derive_seed(seed, 0x5012));
    return make_sort_instance(seed, sample_sort_size(rng, min_size, max_size));
}

struct SortCostModel {
    double read_weight = 1.0;
    double write_weight = 1.0;
    double compare_weight = 1.0;
    std::uint64_t reads = 0;
    std::uint64_t writes = 0;
    std::uint64_t comparisons = 0;

    double cost() const {
        return read_weight * static_cast<double>(reads) + write_weight * static_cast<double>(writes) +
               compare_weight * static_cast<double>(comparisons);
    }
    void reset() { reads = writes = comparisons = 0; }
};

inline double xlog2x(double x) { return x > 0.0 ? x * std::log2(x) : 0.0; }

/// Normalized cost of a partition step; see the header comment.
inline double delta_cost(double c_piv, double n, double a, double b) {
    if (n < 2.0) throw std::invalid_argument("delta_cost needs n >= 2");
    return (c_piv + xlog2x(a) + xlog2x(b) - 2.0 * xlog2x(n / 2.0)) / (n * std::log2(n));
}

inline constexpr double kDeltaCostFloor = 1e-6;

inline double pivot_feedback(double dc) { return 1.0 / std::max(dc, kDeltaCostFloor); }

inline constexpr std::size_t kSortActions = 8;

/// Samples used by action k on a range of `range` elements.
inline std::size_t samples_for_action(std::size_t k, std::size_t range) { return std::min(1 + 2 * k, range); }

namespace detail {

// Instrumented array: every element access goes through the cost model.
class CountingArray {
public:
    CountingArray(std::vector<std::int64_t>& a, SortCostModel& cost) : a_(a), cost_(cost) {}
    std::int64_t read(std::size_t i) {
        ++cost_.reads;
        return a_[i];
    }
    void write(std::size_t i, std::int64_t v) {
        ++cost_.writes;
        a_[i] = v;
    }
    void swap(std::size_t i, std::size_t j) {
        if (i == j) return;
        const auto x = read(i);
        const auto y = read(j);
        write(i, y);
        write(j, x);
    }
    bool less(std::int64_t x, std::int64_t y) {
        ++cost_.comparisons;
        return x < y;
    }
    SortCostModel& cost() { return cost_; }

private:
    std::vector<std::int64_t>& a_;
    SortCostModel& cost_;
};

// s distinct positions in [l, r), Floyd's algorithm.
inline std::vector<std::size_t> sample_positions(std::size_t l, std::size_t r, std::size_t s, Rng& rng) {
    const std::size_t n = r - l;
    std::vector<std::size_t> out;
    out.reserve(s);
    std::unordered_set<std::size_t> seen;
    for (std::size_t j = n - s; j < n; ++j) {
        const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
        const std::size_t pick = seen.insert(t).second ? t : j;
        if (pick == j) seen.insert(j);
        out.push_back(l + pick);
    }
    return out;
}

// Position of the lower median of s sampled elements.
inline std::size_t choose_pivot(CountingArray& arr, std::size_t l, std::size_t r, std::size_t s, Rng& rng) {
    const auto pos = sample_positions(l, r, s, rng);
    if (s == 1) {
        arr.read(pos[0]);
        return pos[0];
    }
    std::vector<std::pair<std::int64_t, std::size_t>> vals;
    vals.reserve(s);
    for (auto p : pos) vals.emplace_back(arr.read(p), p);
    const auto mid = vals.begin() + static_cast<std::ptrdiff_t>((s - 1) / 2);
    std::nth_element(vals.begin(), mid, vals.end(),
                     [&](const auto& x, const auto& y) { return arr.less(x.first, y.first); });
    return mid->second;
}

// Two-pointer (Hoare-style) partition around a[p]; returns the pivot's final
// index. Its cost does not depend on which side of the median the pivot lies.
inline std::size_t partition(CountingArray& arr, std::size_t l, std::size_t r, std::size_t p) {
    arr.swap(p, l);
    const auto pivot = arr.read(l);
    std::size_t i = l, j = r;
    while (true) {
        while (arr.less(arr.read(++i), pivot))
            if (i == r - 1) break;
        while (arr.less(pivot, arr.read(--j)))
            if (j == l) break;
        if (i >= j) break;
        arr.swap(i, j);
    }
    arr.swap(l, j);
    return j;
}

}  // namespace detail

/// Pivot rule: number of samples for a range [l, r).
using SampleRule = std::function<std::size_t(std::size_t l, std::size_t r)>;

struct SortResult {
    double cost = 0.0;
    std::size_t partitions = 0;
};

/// Generic instrumented QuickSort. `on_partition(l, r, m, c_piv)` fires after each step.
template <class OnPartition>
SortResult quicksort_with(std::vector<std::int64_t>& a, const SampleRule& rule, SortCostModel& cost, Rng& rng,
                          OnPartition&& on_partition) {
    detail::CountingArray arr(a, cost);
    SortResult res;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, a.size()}};
    while (!stack.empty()) {
        const auto [l, r] = stack.back();
        stack.pop_back();
        if (r - l < 2) continue;
        const std::size_t s = std::clamp<std::size_t>(rule(l, r), 1, r - l);
        const double before = cost.cost();
        const std::size_t p = detail::choose_pivot(arr, l, r, s, rng);
        const std::size_t m = detail::partition(arr, l, r, p);
        const double c_piv = cost.cost() - before;
        ++res.partitions;
        on_partition(l, r, m, c_piv);
        // Smaller side on top keeps the stack logarithmic.
        if (m - l < r - m - 1) {
            stack.emplace_back(m + 1, r);
            stack.emplace_back(l, m);
        } else {
            stack.emplace_back(l, m);
            stack.emplace_back(m + 1, r);
        }
    }
    res.cost = cost.cost();
    return res;
}

enum class SortBaseline { vanilla, random3, random9, adaptive };

inline const char* to_string(SortBaseline b) {
    switch (b) {
        case SortBaseline::vanilla: return "vanilla";
        case SortBaseline::random3: return "random3";
        case SortBaseline::random9: return "random9";
        case SortBaseline::adaptive: return "adaptive";
    }
    return "vanilla";
}

inline SortBaseline parse_sort_baseline(const std::string& s) {
    if (s == "vanilla") return SortBaseline::vanilla;
    if (s == "random3") return SortBaseline::random3;
    if (s == "random9") return SortBaseline::random9;
    if (s == "adaptive") return SortBaseline::adaptive;
    throw ConfigError("unknown QuickSort baseline '" + s + "'");
}

/// max(1, floor(log2 n) - 1)
inline std::size_t adaptive_samples(std::size_t n) {
    if (n < 2) return 1;
    const auto lg = static_cast<std::int64_t>(std::bit_width(n)) - 1;
    return static_cast<std::size_t>(std::max<std::int64_t>(1, lg - 1));
}

inline SampleRule baseline_rule(SortBaseline b) {
    switch (b) {
        case SortBaseline::vanilla: return [](std::size_t, std::size_t) { return std::size_t{1}; };
        case SortBaseline::random3: return [](std::size_t, std::size_t) { return std::size_t{3}; };
        case SortBaseline::random9: return [](std::size_t, std::size_t) { return std::size_t{9}; };
        case SortBaseline::adaptive: return [](std::size_t l, std::size_t r) { return adaptive_samples(r - l); };
    }
    return {};
}

/// Sorts a copy of `inst` with a baseline rule; returns the cost.
inline double qsort_baseline(const SortInstance& inst, SortBaseline which, std::uint64_t seed,
                             SortCostModel model = {}, std::vector<std::int64_t>* sorted = nullptr) {
    auto a = inst.array;
    model.reset();
    Rng rng(seed);
    const auto res = quicksort_with(a, baseline_rule(which), model, rng, [](auto...) {});
    if (sorted) *sorted = std::move(a);
    return res.cost;
}

inline std::vector<ObservationDef> sort_observations(std::size_t max_size = kSortMaxSize) {
    const auto hi = static_cast<double>(max_size);
    return {ObservationDef::scalar("left", 0.0, hi), ObservationDef::scalar("right", 0.0, hi),
            ObservationDef::scalar("log_size", 0.0, std::log2(hi))};
}

inline std::unique_ptr<SmartChoice> make_sort_choice(const LearnerConfig& cfg, const SelectorConfig& sel = {},
                                                     std::size_t max_size = kSortMaxSize) {
    return std::make_unique<SmartChoice>(OutputDef::categorical(kSortActions), sort_observations(max_size),
                                         [](const State&) { return 0.0; }, cfg, sel);
}

/// Observer for each learned decision: (range size, samples used).
using SampleTrace = std::function<void(std::size_t range, std::size_t samples)>;

/// Sorts `a` in place with `choice` picking the sample count of every
/// partition step. Does not end the episode. Returns the total cost.
inline SortResult qsort_choice(std::vector<std::int64_t>& a, SmartChoice& choice, SortCostModel& model, Rng& rng,
                               const SampleTrace& trace = {}) {
    const SampleRule rule = [&](std::size_t l, std::size_t r) {
        choice.observe_many({{"left", static_cast<double>(l)},
                             {"right", static_cast<double>(r)},
                             {"log_size", std::log2(static_cast<double>(r - l))}});
        const std::size_t s = samples_for_action(choice.predict_index(), r - l);
        if (trace) trace(r - l, s);
        return s;
    };
    return quicksort_with(a, rule, model, rng, [&](std::size_t l, std::size_t r, std::size_t m, double c_piv) {
        const double na = static_cast<double>(m - l);
        const double nb = static_cast<double>(r - m);
        choice.feedback(pivot_feedback(delta_cost(c_piv, na + nb, na, nb)));
    });
}

}  // namespace smartchoices::env
