#pragma once

// Cache replacement with SmartChoices, plus LRU and Belady reference simulators.
//
// Continuous: the choice predicts a score in (-1, 1) on every access; the key's
// priority becomes now + score * capacity * scale and the lowest priority is
// evicted. A zero score is exactly LRU.
// Discrete: on a miss the choice predicts a slot index to evict; an index
// >= the number of residents means "do not evict".
// Rewards: +1 hit, -1 miss, and (discrete) -1 per eviction. Cost is misses.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "smartchoices/errors.hpp"
#include "smartchoices/random.hpp"
#include "smartchoices/smart_choice.hpp"

namespace smartchoices::env {

using Key = std::int64_t;

struct AccessTrace {
    std::vector<Key> keys;
    std::size_t key_count = 100;  ///< keys are 1..key_count
    double alpha = 0.5;
};

/// i.i.d. keys with P(k) proportional to k^-alpha over 1..key_count.
inline AccessTrace make_access_trace(std::uint64_t seed, double alpha = 0.5, std::size_t length = 1000,
                                     std::size_t key_count = 100) {
    if (key_count == 0) throw ConfigError("key_count must be positive");
    std::vector<double> w(key_count);
    for (std::size_t k = 0; k < key_count; ++k) w[k] = std::pow(static_cast<double>(k + 1), -alpha);
    std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
    Rng rng(seed);
    AccessTrace t;
    t.key_count = key_count;
    t.alpha = alpha;
    t.keys.resize(length);
    for (auto& k : t.keys) k = static_cast<Key>(dist(rng) + 1);
    return t;
}

struct CacheStats {
    std::size_t hits = 0;
    std::size_t misses = 0;
    double hit_ratio() const {
        const auto n = hits + misses;
        return n ? static_cast<double>(hits) / static_cast<double>(n) : 0.0;
    }
};

// --- Reference simulators ----------------------------------------------------

inline CacheStats lru_simulate(const std::vector<Key>& trace, std::size_t capacity) {
    if (capacity == 0) throw ConfigError("cache capacity must be positive");
    CacheStats st;
    std::deque<Key> order;  // front = least recently used
    for (Key k : trace) {
        auto it = std::find(order.begin(), order.end(), k);
        if (it != order.end()) {
            ++st.hits;
            order.erase(it);
        } else {
            ++st.misses;
            if (order.size() == capacity) order.pop_front();
        }
        order.push_back(k);
    }
    return st;
}

/// Belady: on a miss with a full cache, evict the resident whose next use is
/// farthest away (never used again counts as infinitely far); ties go to the
/// smallest key.
inline CacheStats oracle_simulate(const std::vector<Key>& trace, std::size_t capacity) {
    if (capacity == 0) throw ConfigError("cache capacity must be positive");
    const std::size_t n = trace.size();
    constexpr std::size_t never = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> next_use(n, never);
    std::unordered_map<Key, std::size_t> last;
    for (std::size_t i = n; i-- > 0;) {
        auto it = last.find(trace[i]);
        if (it != last.end()) next_use[i] = it->second;
        last[trace[i]] = i;
    }
    CacheStats st;
    std::map<Key, std::size_t> resident;  // key -> next use
    for (std::size_t i = 0; i < n; ++i) {
        const Key k = trace[i];
        auto it = resident.find(k);
        if (it != resident.end()) {
            ++st.hits;
            it->second = next_use[i];
            continue;
        }
        ++st.misses;
        if (resident.size() == capacity) {
            auto victim = resident.begin();
            for (auto r = resident.begin(); r != resident.end(); ++r)
                if (r->second > victim->second) victim = r;  // map order keeps the smallest key on ties
            resident.erase(victim);
        }
        resident.emplace(k, next_use[i]);
    }
    return st;
}

// --- Frequency features --------------------------------------------------------

/// Sliding window over the most recent accesses with per-key counts.
class AccessWindow {
public:
    explicit AccessWindow(std::size_t window) : window_(window) {
        if (window_ == 0) throw ConfigError("frequency window must be >= 1");
    }
    void push(Key k) {
        recent_.push_back(k);
        ++counts_[k];
        if (recent_.size() > window_) {
            const Key old = recent_.front();
            recent_.pop_front();
            if (--counts_[old] == 0) counts_.erase(old);
        }
    }
    /// Occurrences of `k` in the window divided by the window size.
    double frequency(Key k) const {
        auto it = counts_.find(k);
        return it == counts_.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(window_);
    }
    std::size_t window() const { return window_; }

private:
    std::size_t window_;
    std::deque<Key> recent_;
    std::unordered_map<Key, std::size_t> counts_;
};

/// Frequency of `key` in the last `window` entries of `history`, followed by
/// the frequency of every resident in `residents`.
inline std::vector<double> frequency_features(const std::vector<Key>& history, Key key, std::size_t window,
                                              const std::vector<Key>& residents = {}) {
    if (window == 0) throw ConfigError("frequency window must be >= 1");
    const std::size_t start = history.size() > window ? history.size() - window : 0;
    const auto freq = [&](Key k) {
        const auto c = std::count(history.begin() + static_cast<std::ptrdiff_t>(start), history.end(), k);
        return static_cast<double>(c) / static_cast<double>(window);
    };
    std::vector<double> out{freq(key)};
    for (Key r : residents) out.push_back(freq(r));
    return out;
}

// --- Continuous replacement policy -----------------------------------------------

/// Priority cache. Ties in priority evict the entry accessed longest ago.
class PriorityCache {
public:
    explicit PriorityCache(std::size_t capacity) : capacity_(capacity) {
        if (capacity_ == 0) throw ConfigError("cache capacity must be positive");
    }

    bool contains(Key k) const { return entries_.count(k) > 0; }

    void update(Key k, double priority, std::uint64_t now) { entries_.at(k) = {priority, now}; }

    /// Inserts `k`; if that overflows, evicts and returns the lowest-priority
    /// key, which may be `k` itself.
    std::optional<Key> push(Key k, double priority, std::uint64_t now) {
        entries_[k] = {priority, now};
        if (entries_.size() <= capacity_) return std::nullopt;
        auto victim = entries_.begin();
        for (auto it = entries_.begin(); it != entries_.end(); ++it) {
            const auto& [p, t] = it->second;
            const auto& [vp, vt] = victim->second;
            if (p < vp || (p == vp && t < vt)) victim = it;
        }
        const Key out = victim->first;
        entries_.erase(victim);
        return out;
    }

    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::vector<Key> keys() const {
        std::vector<Key> out;
        for (const auto& e : entries_) out.push_back(e.first);
        return out;
    }

private:
    struct Entry {
        double priority;
        std::uint64_t accessed;
    };
    std::size_t capacity_;
    std::map<Key, Entry> entries_;
};

enum class CacheVariant { continuous, continuous_freq, discrete };

inline CacheVariant parse_cache_variant(const std::string& s) {
    if (s == "continuous") return CacheVariant::continuous;
    if (s == "continuous_freq") return CacheVariant::continuous_freq;
    if (s == "discrete") return CacheVariant::discrete;
    throw ConfigError("unknown cache variant '" + s + "'");
}

struct CacheOptions {
    std::size_t capacity = 10;
    std::size_t key_count = 100;
    double scale = 1.0;
    std::size_t window = 100;
};

inline std::vector<ObservationDef> cache_observations(CacheVariant v, const CacheOptions& o) {
    const std::size_t key_space = o.key_count + 1;  // id 0 is padding
    std::vector<ObservationDef> defs{ObservationDef::key("access", key_space)};
    if (v == CacheVariant::discrete) {
        defs.push_back(ObservationDef::key("memory", key_space, o.capacity));
        defs.push_back(ObservationDef::key("evict", key_space));
        return defs;
    }
    defs.push_back(ObservationDef::scalar("hit", 0.0, 1.0));
    if (v == CacheVariant::continuous_freq) {
        defs.push_back(ObservationDef::scalar("frequency", 0.0, 1.0));
        defs.push_back(ObservationDef::vector("memory_frequency", o.capacity, 0.0, 1.0));
    }
    return defs;
}

inline std::unique_ptr<SmartChoice> make_cache_choice(CacheVariant v, const CacheOptions& o, const LearnerConfig& cfg,
                                                      const SelectorConfig& sel = {}) {
    if (v == CacheVariant::discrete) {
        const double full = 0.0, keep = static_cast<double>(o.capacity);
        const std::size_t cap = o.capacity;
        // LRU: evict slot 0 (least recent) when full, otherwise do not evict.
        auto initial = [full, keep, cap](const State& s) {
            std::size_t residents = 0;
            // keys: access, memory[0..cap), evict
            for (std::size_t i = 1; i < s.keys.size() && i <= cap; ++i) residents += s.keys[i] != kPaddingKey;
            return residents == cap ? full : keep;
        };
        return std::make_unique<SmartChoice>(OutputDef::categorical(o.capacity + 1), cache_observations(v, o), initial,
                                             cfg, sel);
    }
    return std::make_unique<SmartChoice>(OutputDef::continuous(-1.0, 1.0), cache_observations(v, o),
                                         [](const State&) { return 0.0; }, cfg, sel);
}

/// Replays `trace` through a continuous-policy cache. Does not end the episode.
inline CacheStats run_cache_continuous(const AccessTrace& trace, SmartChoice& choice, CacheVariant v,
                                       const CacheOptions& o) {
    PriorityCache cache(o.capacity);
    AccessWindow window(o.window);
    CacheStats st;
    std::vector<double> mem(o.capacity);
    std::uint64_t now = 0;
    for (Key k : trace.keys) {
        ++now;
        window.push(k);
        const bool hit = cache.contains(k);
        choice.feedback(hit ? 1.0 : -1.0);
        if (hit) ++st.hits;
        else ++st.misses;

        choice.observe_key("access", k);
        choice.observe("hit", hit ? 1.0 : 0.0);
        if (v == CacheVariant::continuous_freq) {
            choice.observe("frequency", window.frequency(k));
            std::fill(mem.begin(), mem.end(), 0.0);
            std::size_t i = 0;
            for (Key r : cache.keys()) mem[i++] = window.frequency(r);
            std::sort(mem.begin(), mem.end());
            choice.observe("memory_frequency", mem);
        }
        const double score = choice.predict();
        const double priority = static_cast<double>(now) + score * static_cast<double>(o.capacity) * o.scale;
        if (hit) cache.update(k, priority, now);
        else cache.push(k, priority, now);
    }
    return st;
}

/// Replays `trace` through a discrete-policy cache. `keys` is kept in recency
/// order, least recent first. Does not end the episode.
inline CacheStats run_cache_discrete(const AccessTrace& trace, SmartChoice& choice, const CacheOptions& o) {
    std::vector<Key> keys;
    CacheStats st;
    std::vector<std::int64_t> memory(o.capacity);
    for (Key k : trace.keys) {
        auto it = std::find(keys.begin(), keys.end(), k);
        if (it != keys.end()) {
            ++st.hits;
            choice.feedback(1.0);
            choice.observe_key("access", k);
            keys.erase(it);
            keys.push_back(k);
            continue;
        }
        ++st.misses;
        choice.feedback(-1.0);
        choice.observe_key("access", k);
        std::fill(memory.begin(), memory.end(), kPaddingKey);
        std::copy(keys.begin(), keys.end(), memory.begin());
        choice.observe_keys("memory", memory);
        const std::size_t i = choice.predict_index();
        if (i < keys.size()) {
            choice.feedback(-1.0);
            choice.observe_key("evict", keys[i]);
            keys.erase(keys.begin() + static_cast<std::ptrdiff_t>(i));
            keys.push_back(k);
        } else if (keys.size() < o.capacity) {
            keys.push_back(k);
        }
    }
    return st;
}

inline CacheStats run_cache(const AccessTrace& trace, SmartChoice& choice, CacheVariant v, const CacheOptions& o) {
    return v == CacheVariant::discrete ? run_cache_discrete(trace, choice, o) : run_cache_continuous(trace, choice, v, o);
}

}  // namespace smartchoices::env
