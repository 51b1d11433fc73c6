#pragma once

// SmartChoice: a decision point with an Observe / Predict / Feedback API.
//
//   SmartChoice choice(OutputDef::continuous(0, 1),
//                      {ObservationDef::scalar("low", 0, 10), ...},
//                      [](const State&) { return 0.5; }, config);
//   choice.observe("low", 0.12);
//   double q = choice.predict();
//   choice.feedback(-1);
//   choice.end_episode();
//
// Observations accumulate until the next predict(), which turns them into a
// normalized State. Every feedback() between two predict() calls is credited
// to the earlier one. end_episode() closes the episode, hands its transitions
// to the replay buffer, reports the return to the policy selector and, in
// synchronous mode, runs the configured number of gradient steps.

#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "smartchoices/ddqn.hpp"
#include "smartchoices/errors.hpp"
#include "smartchoices/learner.hpp"
#include "smartchoices/policy_selector.hpp"
#include "smartchoices/td3.hpp"

namespace smartchoices {

struct OutputDef {
    enum class Kind { continuous, categorical };

    Kind kind = Kind::continuous;
    std::size_t shape = 1;
    double lo = 0.0;
    double hi = 1.0;
    std::size_t cardinality = 0;

    static OutputDef continuous(double lo, double hi, std::size_t shape = 1) {
        return {Kind::continuous, shape, lo, hi, 0};
    }
    static OutputDef categorical(std::size_t cardinality, std::size_t shape = 1) {
        return {Kind::categorical, shape, 0.0, 0.0, cardinality};
    }

    void validate() const {
        if (shape != 1) throw DefinitionError("only scalar outputs (shape 1) are supported");
        if (kind == Kind::continuous && !(lo < hi)) throw DefinitionError("continuous output needs lo < hi");
        if (kind == Kind::categorical && cardinality < 2) throw DefinitionError("categorical output needs cardinality >= 2");
    }
};

struct ObservationDef {
    enum class Kind { scalar, key, vector };

    std::string name;
    Kind kind = Kind::scalar;
    std::size_t shape = 1;
    double lo = 0.0;
    double hi = 1.0;
    std::size_t key_space = 0;  ///< valid key ids are [0, key_space); id 0 doubles as padding

    static ObservationDef scalar(std::string name, double lo, double hi) {
        return {std::move(name), Kind::scalar, 1, lo, hi, 0};
    }
    static ObservationDef vector(std::string name, std::size_t shape, double lo, double hi) {
        return {std::move(name), Kind::vector, shape, lo, hi, 0};
    }
    static ObservationDef key(std::string name, std::size_t key_space, std::size_t shape = 1) {
        return {std::move(name), Kind::key, shape, 0.0, 0.0, key_space};
    }

    bool categorical() const { return kind == Kind::key; }
};

/// Filler for observations that were not provided before predict().
inline constexpr double kMissingObservation = 0.5;
inline constexpr std::int64_t kPaddingKey = 0;

using InitialFunction = std::function<double(const State&)>;

/// Values observed since the last predict(), indexed like the definitions.
struct PendingObservations {
    std::vector<std::optional<std::vector<double>>> values;
};

struct AssembleStats {
    std::size_t missing = 0;
};

/// Normalizes floats to [0, 1] by (v - lo) / (hi - lo), in definition order;
/// keys become ids. Missing floats are 0.5, missing keys are the padding id.
inline State assemble_state(const PendingObservations& pending, const std::vector<ObservationDef>& defs,
                            AssembleStats* stats = nullptr) {
    State s;
    for (std::size_t i = 0; i < defs.size(); ++i) {
        const auto& d = defs[i];
        const auto& v = i < pending.values.size() ? pending.values[i] : std::nullopt;
        if (!v && stats) ++stats->missing;
        for (std::size_t k = 0; k < d.shape; ++k) {
            const bool have = v && k < v->size();
            if (d.categorical()) {
                s.keys.push_back(have ? static_cast<std::int64_t>((*v)[k]) : kPaddingKey);
            } else {
                s.dense.push_back(have ? ((*v)[k] - d.lo) / (d.hi - d.lo) : kMissingObservation);
            }
        }
    }
    return s;
}

inline InputLayout layout_of(const std::vector<ObservationDef>& defs) {
    InputLayout l;
    for (const auto& d : defs) {
        if (d.categorical()) {
            if (l.key_space != 0 && l.key_space != d.key_space)
                throw DefinitionError("all key observations of a choice must share one key space");
            l.key_space = d.key_space;
            l.key_slots += d.shape;
        } else {
            l.dense_width += d.shape;
        }
    }
    return l;
}

/// Builds the default learner for an output: TD3 when continuous, DDQN when categorical.
inline std::unique_ptr<Learner> make_learner(const OutputDef& out, const std::vector<ObservationDef>& defs,
                                             LearnerConfig cfg) {
    const auto layout = layout_of(defs);
    if (out.kind == OutputDef::Kind::continuous) {
        cfg.algorithm = Algorithm::td3;
        return std::make_unique<Td3Learner>(layout, std::move(cfg));
    }
    cfg.algorithm = Algorithm::ddqn;
    return std::make_unique<DdqnLearner>(layout, out.cardinality, std::move(cfg));
}

class SmartChoice {
public:
    SmartChoice(OutputDef output, std::vector<ObservationDef> observations, InitialFunction initial,
                const LearnerConfig& config, SelectorConfig selector = {})
        : SmartChoice(output, observations, std::move(initial), nullptr, selector, config.seed) {
        learner_ = make_learner(output_, defs_, config);
    }

    /// With a caller-supplied learner (custom algorithms, test stubs).
    SmartChoice(OutputDef output, std::vector<ObservationDef> observations, InitialFunction initial,
                std::unique_ptr<Learner> learner, SelectorConfig selector = {}, std::uint64_t seed = 1)
        : output_(output), defs_(std::move(observations)), initial_(std::move(initial)), learner_(std::move(learner)),
          selector_(selector, static_cast<bool>(initial_)), rng_(derive_seed(seed, 0xac7)) {
        output_.validate();
        for (std::size_t i = 0; i < defs_.size(); ++i) {
            const auto& d = defs_[i];
            if (d.name.empty()) throw DefinitionError("observation name must not be empty");
            if (index_.count(d.name)) throw DefinitionError("duplicate observation '" + d.name + "'");
            if (d.shape == 0) throw DefinitionError("observation '" + d.name + "' has zero shape");
            if (d.categorical() && d.key_space < 2)
                throw DefinitionError("key observation '" + d.name + "' needs key_space >= 2");
            if (!d.categorical() && !(d.lo < d.hi))
                throw DefinitionError("observation '" + d.name + "' needs lo < hi");
            index_.emplace(d.name, i);
        }
        layout_of(defs_);
        pending_.values.resize(defs_.size());
    }

    SmartChoice(const SmartChoice&) = delete;
    SmartChoice& operator=(const SmartChoice&) = delete;
    ~SmartChoice() { stop_async_training(); }

    // --- Observe ----------------------------------------------------------

    void observe(std::string_view name, double value) { observe(name, std::span<const double>(&value, 1)); }

    void observe(std::string_view name, std::span<const double> values) {
        const auto i = lookup(name);
        const auto& d = defs_[i];
        if (values.size() > d.shape)
            throw ObservationError("observation '" + d.name + "' takes at most " + std::to_string(d.shape) + " values");
        std::vector<double> v(values.begin(), values.end());
        for (auto& x : v) {
            double lo = d.lo, hi = d.hi;
            if (d.categorical()) {
                lo = 0.0;
                hi = static_cast<double>(d.key_space - 1);
                x = std::round(x);
            }
            if (!(x >= lo && x <= hi)) {
                x = std::isnan(x) ? lo : std::clamp(x, lo, hi);
                ++clamped_;
            }
        }
        pending_.values[i] = std::move(v);
    }

    void observe_key(std::string_view name, std::int64_t key) { observe(name, static_cast<double>(key)); }

    void observe_keys(std::string_view name, std::span<const std::int64_t> keys) {
        std::vector<double> v(keys.begin(), keys.end());
        observe(name, std::span<const double>(v));
    }

    void observe_many(std::initializer_list<std::pair<std::string_view, double>> values) {
        for (const auto& [n, v] : values) observe(n, v);
    }

    void observe_many(const std::map<std::string, double>& values) {
        for (const auto& [n, v] : values) observe(n, v);
    }

    /// State the next predict() would see, without consuming the observations.
    State assemble_state() const { return smartchoices::assemble_state(pending_, defs_); }

    // --- Predict ----------------------------------------------------------

    /// Value in the output domain: within [lo, hi] for continuous outputs, a
    /// category index for categorical ones.
    double predict() {
        AssembleStats st;
        State state = smartchoices::assemble_state(pending_, defs_, &st);
        missing_ += st.missing;
        for (auto& v : pending_.values) v.reset();

        if (open_) {
            open_->next_state = state;
            episode_.push_back(std::move(*open_));
            open_.reset();
        }
        if (!episode_tag_) episode_tag_ = forced_ ? *forced_ : selector_.select(rng_);

        double value = 0.0;
        double learner_action = 0.0;
        if (*episode_tag_ == PolicyTag::initial && initial_) {
            value = initial_(state);
            learner_action = to_learner_action(value);
        } else {
            learner_action = learner_->act(state, explore_, rng_);
            value = from_learner_action(learner_action);
        }
        open_ = Transition{std::move(state), learner_action, 0.0, {}, false, *episode_tag_};
        ++predictions_;
        return value;
    }

    std::size_t predict_index() {
        if (output_.kind != OutputDef::Kind::categorical) throw DefinitionError("predict_index on a continuous choice");
        return static_cast<std::size_t>(predict());
    }

    // --- Feedback ---------------------------------------------------------

    void feedback(double reward) {
        if (!open_) {
            ++dropped_feedback_;
            return;
        }
        open_->reward += reward;
    }

    // --- Episodes ---------------------------------------------------------

    /// Closes the episode. Returns the episode return, or nullopt for an empty episode.
    /// When `score` is given the policy selector judges the episode by it
    /// instead of the return (useful when returns scale with instance size).
    std::optional<double> end_episode(std::optional<double> score = std::nullopt) {
        if (open_) {
            open_->terminal = true;
            open_->next_state = open_->state;
            episode_.push_back(std::move(*open_));
            open_.reset();
        }
        if (episode_.empty()) return std::nullopt;

        double ret = 0.0;
        for (const auto& t : episode_) ret += t.reward;
        const PolicyTag tag = *episode_tag_;
        const std::size_t n = episode_.size();
        for (auto& t : episode_) learner_->buffer().push(std::move(t));
        episode_.clear();
        episode_tag_.reset();
        selector_.report_return(tag, score.value_or(ret));
        last_return_ = ret;
        last_tag_ = tag;

        if (!async_running_) {
            const auto& cfg = learner_->config();
            const std::size_t steps = cfg.updates_per_episode > 0 ? cfg.updates_per_episode : n;
            bool trained = false;
            for (std::size_t i = 0; i < steps; ++i) trained = learner_->train_step().has_value() || trained;
            if (trained) learner_->publish_snapshot();
        }
        return ret;
    }

    /// Drops the current episode without storing transitions or reporting a return.
    void abandon_episode() {
        open_.reset();
        episode_.clear();
        episode_tag_.reset();
    }

    /// Pins episode policy selection (nullopt restores the selector). A pinned
    /// learned policy without an initial function is the only option anyway.
    void force_policy(std::optional<PolicyTag> tag) {
        if (tag == PolicyTag::initial && !initial_) throw DefinitionError("no initial function to force");
        forced_ = tag;
    }
    std::optional<PolicyTag> forced_policy() const { return forced_; }

    // --- Asynchronous training -------------------------------------------

    /// Trains on a background thread, publishing a snapshot every
    /// `publish_every` gradient steps. predict() keeps serving the latest snapshot.
    void start_async_training(std::size_t publish_every = 16) {
        if (async_running_) return;
        async_running_ = true;
        stop_flag_ = false;
        trainer_ = std::thread([this, publish_every] {
            std::size_t since_publish = 0;
            while (!stop_flag_.load()) {
                if (learner_->train_step()) {
                    if (++since_publish >= publish_every) {
                        learner_->publish_snapshot();
                        since_publish = 0;
                    }
                } else {
                    std::this_thread::sleep_for(std::chrono::milliseconds(1));
                }
            }
            if (since_publish > 0) learner_->publish_snapshot();
        });
    }

    void stop_async_training() {
        if (!async_running_) return;
        stop_flag_ = true;
        if (trainer_.joinable()) trainer_.join();
        async_running_ = false;
    }

    // --- Accessors --------------------------------------------------------

    void set_exploration(bool on) { explore_ = on; }
    bool exploration() const { return explore_; }
    const OutputDef& output_def() const { return output_; }
    const std::vector<ObservationDef>& observation_defs() const { return defs_; }
    bool has_initial_function() const { return static_cast<bool>(initial_); }
    Learner& learner() { return *learner_; }
    PolicySelector& selector() { return selector_; }
    const PolicySelector& selector() const { return selector_; }
    const std::vector<Transition>& episode_log() const { return episode_; }
    const std::optional<Transition>& open_transition() const { return open_; }
    std::optional<PolicyTag> episode_policy() const { return episode_tag_; }
    std::optional<PolicyTag> last_episode_policy() const { return last_tag_; }
    double last_episode_return() const { return last_return_; }
    std::size_t clamp_count() const { return clamped_; }
    std::size_t missing_count() const { return missing_; }
    std::size_t dropped_feedback_count() const { return dropped_feedback_; }
    std::uint64_t prediction_count() const { return predictions_; }

    /// Learner-space action to output value.
    double from_learner_action(double a) const {
        if (output_.kind == OutputDef::Kind::categorical) return a;
        return output_.lo + (std::clamp(a, -1.0, 1.0) + 1.0) * 0.5 * (output_.hi - output_.lo);
    }

    /// Output value to learner-space action.
    double to_learner_action(double value) const {
        if (output_.kind == OutputDef::Kind::categorical) {
            const double idx = std::round(value);
            if (idx < 0.0 || idx >= static_cast<double>(output_.cardinality))
                throw DefinitionError("initial function returned category outside the output definition");
            return idx;
        }
        return std::clamp(2.0 * (value - output_.lo) / (output_.hi - output_.lo) - 1.0, -1.0, 1.0);
    }

private:
    std::size_t lookup(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) throw ObservationError("undeclared observation '" + std::string(name) + "'");
        return it->second;
    }

    OutputDef output_;
    std::vector<ObservationDef> defs_;
    std::map<std::string, std::size_t> index_;
    InitialFunction initial_;
    std::unique_ptr<Learner> learner_;
    PolicySelector selector_;
    Rng rng_;
    PendingObservations pending_;
    std::optional<Transition> open_;
    std::vector<Transition> episode_;
    std::optional<PolicyTag> episode_tag_;
    std::optional<PolicyTag> last_tag_;
    std::optional<PolicyTag> forced_;
    double last_return_ = 0.0;
    bool explore_ = true;
    std::size_t clamped_ = 0;
    std::size_t missing_ = 0;
    std::size_t dropped_feedback_ = 0;
    std::uint64_t predictions_ = 0;
    bool async_running_ = false;
    std::atomic<bool> stop_flag_{false};
    std::thread trainer_;
};

}  // namespace smartchoices
