#pragma once

// Episode-level switching between the initial function and the learned policy.
//
// Each policy's episode returns are tracked with an exponential moving
// average. After every report the learned policy is judged against the
// initial function:
//   ema_learned >= ema_initial - margin  ->  p_learned += step_up   (capped at 1)
//   otherwise                            ->  p_learned *= step_down (floored at p_min)
// p_learned starts at 0. Until the learned policy has produced a return it
// cannot be judged; p_learned is then lifted to step_up so it gets tried.
// The floor p_min applies once p_learned has been raised at least once.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>

#include "smartchoices/errors.hpp"
#include "smartchoices/learner.hpp"
#include "smartchoices/random.hpp"

namespace smartchoices {

struct SelectorConfig {
    double ema_decay = 0.95;
    double margin_frac = 0.05;  ///< margin = margin_frac * |ema_initial| + margin_abs
    double margin_abs = 1e-6;
    double step_up = 0.05;
    double step_down = 0.5;
    double p_min = 0.05;
    /// Forces p_learned >= episode / decay_episodes when set.
    bool decay_enabled = false;
    std::size_t decay_episodes = 1000;
    std::size_t history_limit = 100000;

    void validate() const {
        if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ConfigError("ema_decay must lie in [0, 1)");
        if (margin_frac < 0.0 || margin_abs < 0.0) throw ConfigError("selector margin must be >= 0");
        if (!(step_up > 0.0 && step_up <= 1.0)) throw ConfigError("step_up must lie in (0, 1]");
        if (!(step_down >= 0.0 && step_down < 1.0)) throw ConfigError("step_down must lie in [0, 1)");
        if (!(p_min >= 0.0 && p_min <= 1.0)) throw ConfigError("p_min must lie in [0, 1]");
        if (decay_enabled && decay_episodes == 0) throw ConfigError("decay_episodes must be positive");
    }
};

class PolicySelector {
public:
    PolicySelector(SelectorConfig cfg, bool has_initial_function)
        : cfg_(cfg), has_initial_(has_initial_function), p_learned_(has_initial_function ? 0.0 : 1.0) {
        cfg_.validate();
    }

    PolicyTag select(Rng& rng) const {
        if (!has_initial_) return PolicyTag::learned;
        if (p_learned_ >= 1.0) return PolicyTag::learned;
        if (p_learned_ <= 0.0) return PolicyTag::initial;
        return uniform01(rng) < p_learned_ ? PolicyTag::learned : PolicyTag::initial;
    }

    void report_return(PolicyTag tag, double episode_return) {
        auto& ema = tag == PolicyTag::initial ? ema_initial_ : ema_learned_;
        ema = ema ? cfg_.ema_decay * *ema + (1.0 - cfg_.ema_decay) * episode_return : episode_return;
        ++episodes_;
        history_.push_back(tag);
        if (history_.size() > cfg_.history_limit) history_.pop_front();

        if (!has_initial_) {
            p_learned_ = 1.0;
            return;
        }
        if (!ema_learned_ || !ema_initial_) {
            p_learned_ = std::max(p_learned_, cfg_.step_up);
            raised_ = true;
        } else if (*ema_learned_ >= *ema_initial_ - margin()) {
            p_learned_ = std::min(1.0, p_learned_ + cfg_.step_up);
            raised_ = true;
        } else {
            p_learned_ = std::max(raised_ ? cfg_.p_min : 0.0, p_learned_ * cfg_.step_down);
        }
        if (cfg_.decay_enabled) {
            const double forced = std::min(1.0, static_cast<double>(episodes_) / static_cast<double>(cfg_.decay_episodes));
            p_learned_ = std::max(p_learned_, forced);
        }
    }

    /// Fraction of the last `window` reported episodes that used the initial function.
    double usage_rate(std::size_t window) const {
        if (window == 0) throw ConfigError("usage window must be >= 1");
        if (history_.empty()) return 0.0;
        const std::size_t n = std::min(window, history_.size());
        const auto initial = std::count(history_.end() - static_cast<std::ptrdiff_t>(n), history_.end(), PolicyTag::initial);
        return static_cast<double>(initial) / static_cast<double>(n);
    }

    double margin() const { return cfg_.margin_frac * std::abs(ema_initial_.value_or(0.0)) + cfg_.margin_abs; }
    double p_learned() const { return p_learned_; }
    /// Overrides the current probability; the floor counts as active afterwards if p > 0.
    void set_p_learned(double p) {
        p_learned_ = has_initial_ ? std::clamp(p, 0.0, 1.0) : 1.0;
        raised_ = raised_ || p_learned_ > 0.0;
    }
    std::optional<double> ema_initial() const { return ema_initial_; }
    std::optional<double> ema_learned() const { return ema_learned_; }
    bool has_initial_function() const { return has_initial_; }
    std::uint64_t episodes() const { return episodes_; }
    const SelectorConfig& config() const { return cfg_; }

private:
    SelectorConfig cfg_;
    bool has_initial_;
    double p_learned_;
    bool raised_ = false;
    std::optional<double> ema_initial_, ema_learned_;
    std::uint64_t episodes_ = 0;
    std::deque<PolicyTag> history_;
};

}  // namespace smartchoices
