#pragma once

// Types shared by every learner: states, transitions, the replay buffer,
// hyperparameters, the input encoder and the snapshot slot used to hand
// immutable policy parameters from the training side to the serving side.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "smartchoices/errors.hpp"
#include "smartchoices/random.hpp"
#include "smartchoices/tinynet.hpp"

namespace smartchoices {

enum class PolicyTag { initial, learned };

inline const char* to_string(PolicyTag t) { return t == PolicyTag::initial ? "initial" : "learned"; }

/// Assembled observation vector: normalized floats plus categorical key ids.
struct State {
    std::vector<double> dense;
    std::vector<std::int64_t> keys;

    friend bool operator==(const State&, const State&) = default;
};

/// One Predict and everything credited to it. `action` lives in learner
/// space: a category index for DDQN, a value in [-1, 1] for TD3.
struct Transition {
    State state;
    double action = 0.0;
    double reward = 0.0;
    State next_state;
    bool terminal = false;
    PolicyTag tag = PolicyTag::initial;
};

enum class Algorithm { ddqn, td3 };

inline const char* to_string(Algorithm a) { return a == Algorithm::ddqn ? "ddqn" : "td3"; }

/// Hyperparameters for a learner. Defaults are the binary-search column of
/// the reference setup; problem configs override per experiment.
struct LearnerConfig {
    Algorithm algorithm = Algorithm::td3;
    double discount = 0.0;
    double lr_actor = 1e-3;
    double lr_critic = 1e-4;
    std::size_t batch_size = 256;
    double tau = 0.05;
    double action_noise = 0.03;
    double target_noise = 0.2;
    double temperature = 0.1;
    std::size_t update_period = 1;
    std::string actor_layers = "16:relu";  ///< hidden layers; the tanh output is appended
    std::string critic_layers = "16:relu";  ///< hidden layers; the output layer is appended
    std::size_t embedding_size = 8;
    std::size_t buffer_capacity = 20000;
    double grad_clip_norm = 10.0;
    /// TD3 only: L2 penalty on the actor's pre-tanh output. Keeps the actor out
    /// of tanh saturation, where its gradient vanishes for good.
    double actor_preact_l2 = 0.0;
    /// Initial value of every Q output bias; > 0 gives optimistic exploration.
    double optimistic_q = 0.0;
    /// Gradient steps run at each episode end in synchronous mode; 0 means
    /// one step per transition of the finished episode.
    std::size_t updates_per_episode = 0;
    std::uint64_t seed = 1;

    void validate() const {
        if (!(discount >= 0.0 && discount <= 1.0)) throw ConfigError("discount must lie in [0, 1]");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (action_noise < 0.0 || target_noise < 0.0) throw ConfigError("noise sigma must be >= 0");
        if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
        if (temperature < 0.0) throw ConfigError("temperature must be >= 0");
        if (update_period < 1) throw ConfigError("update_period must be >= 1");
        if (buffer_capacity < 1) throw ConfigError("buffer_capacity must be >= 1");
        if (lr_actor <= 0.0 || lr_critic <= 0.0) throw ConfigError("learning rates must be positive");
        if (actor_preact_l2 < 0.0) throw ConfigError("actor_preact_l2 must be >= 0");
    }
};

/// Uniform-sampling FIFO replay memory. One writer and one reader may use it
/// concurrently.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 20000) : capacity_(capacity) {
        if (capacity_ == 0) throw ConfigError("replay buffer capacity must be positive");
    }

    void push(Transition t) {
        std::lock_guard lock(mu_);
        if (items_.size() == capacity_) items_.pop_front();
        items_.push_back(std::move(t));
        ++pushed_;
    }

    /// `n` transitions drawn uniformly with replacement, or nullopt when fewer
    /// than `n` are stored.
    std::optional<std::vector<Transition>> sample(std::size_t n, Rng& rng) const {
        std::lock_guard lock(mu_);
        if (items_.size() < n || n == 0) return std::nullopt;
        std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
        std::vector<Transition> batch;
        batch.reserve(n);
        for (std::size_t i = 0; i < n; ++i) batch.push_back(items_[pick(rng)]);
        return batch;
    }

    /// As sample(), but reuses the storage of `out`. Returns false, leaving
    /// `out` untouched, when fewer than `n` are stored.
    bool sample_into(std::size_t n, Rng& rng, std::vector<Transition>& out) const {
        std::lock_guard lock(mu_);
        if (items_.size() < n || n == 0) return false;
        std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
        out.resize(n);
        for (auto& t : out) t = items_[pick(rng)];
        return true;
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return items_.size();
    }
    std::size_t capacity() const { return capacity_; }
    std::uint64_t total_pushed() const {
        std::lock_guard lock(mu_);
        return pushed_;
    }

    /// Copy of the stored transitions, oldest first.
    std::vector<Transition> contents() const {
        std::lock_guard lock(mu_);
        return {items_.begin(), items_.end()};
    }

private:
    std::size_t capacity_;
    std::deque<Transition> items_;
    std::uint64_t pushed_ = 0;
    mutable std::mutex mu_;
};

/// Shape of a learner's state input.
struct InputLayout {
    std::size_t dense_width = 0;
    std::size_t key_slots = 0;
    std::size_t key_space = 0;  ///< rows of the embedding table; 0 when there are no keys
};

/// Concatenates dense features with embedding rows for each key slot, and
/// optionally appends an action column.
class Encoder {
public:
    Encoder() = default;
    Encoder(InputLayout layout, std::size_t embedding_width)
        : layout_(layout), width_(layout.key_slots > 0 ? embedding_width : 0) {}

    std::size_t state_width() const { return layout_.dense_width + layout_.key_slots * width_; }
    const InputLayout& layout() const { return layout_; }

    void encode_row(const State& s, const nn::Embedding* table, double* out) const {
        if (s.dense.size() != layout_.dense_width || s.keys.size() != layout_.key_slots)
            throw ShapeError("state does not match learner input layout");
        std::copy(s.dense.begin(), s.dense.end(), out);
        out += layout_.dense_width;
        for (auto k : s.keys) {
            auto r = table->row(k);
            std::copy(r.begin(), r.end(), out);
            out += width_;
        }
    }

    /// Encoded states; when `actions` is given, one extra trailing column.
    template <class GetState>
    nn::Matrix encode(std::size_t n, GetState&& get, const nn::Embedding* table,
                      const std::vector<double>* actions = nullptr) const {
        nn::Matrix m;
        encode_into(n, get, table, actions, m);
        return m;
    }

    template <class GetState>
    void encode_into(std::size_t n, GetState&& get, const nn::Embedding* table, const std::vector<double>* actions,
                     nn::Matrix& m) const {
        m.resize(n, state_width() + (actions ? 1 : 0));
        for (std::size_t i = 0; i < n; ++i) {
            encode_row(get(i), table, m.row(i));
            if (actions) m(i, state_width()) = (*actions)[i];
        }
    }

    /// Routes input-gradient columns that belong to key slots into row grads.
    template <class GetState>
    void scatter_key_grads(std::size_t n, GetState&& get, const nn::Matrix& input_grad,
                           nn::SparseRowGrads& out) const {
        if (layout_.key_slots == 0) return;
        for (std::size_t i = 0; i < n; ++i) {
            const State& s = get(i);
            const double* g = input_grad.row(i) + layout_.dense_width;
            for (std::size_t slot = 0; slot < layout_.key_slots; ++slot) {
                auto row = out.row(s.keys[slot]);
                for (std::size_t j = 0; j < width_; ++j) row[j] += g[slot * width_ + j];
            }
        }
    }

private:
    InputLayout layout_;
    std::size_t width_ = 0;
};

/// Immutable policy parameters as served to predict().
struct PolicySnapshot {
    nn::Mlp network;  ///< Q network (DDQN) or actor (TD3)
    std::optional<nn::Embedding> embedding;
    std::uint64_t version = 0;

    std::vector<nn::NamedTensor> tensors() const {
        auto copy = network;
        auto out = nn::to_tensors(copy, "policy.");
        if (embedding) out.push_back(nn::to_tensor(*embedding, "policy.embedding"));
        return out;
    }
};

/// Latest published snapshot. Readers always get a complete snapshot.
class SnapshotSlot {
public:
    void publish(std::shared_ptr<const PolicySnapshot> s) {
        std::lock_guard lock(mu_);
        current_ = std::move(s);
    }
    std::shared_ptr<const PolicySnapshot> load() const {
        std::lock_guard lock(mu_);
        return current_;
    }

private:
    mutable std::mutex mu_;
    std::shared_ptr<const PolicySnapshot> current_;
};

struct TrainStats {
    std::uint64_t step = 0;
    double loss = 0.0;
    double mean_q = 0.0;
};

/// Writes "step,loss,mean_q" lines.
class TrainingLog {
public:
    explicit TrainingLog(std::ostream& os) : os_(&os) { *os_ << "step,loss,mean_q\n"; }
    void write(const TrainStats& s) { *os_ << s.step << ',' << s.loss << ',' << s.mean_q << '\n'; }

private:
    std::ostream* os_;
};

/// A learner acts from its latest published snapshot and trains from its
/// replay buffer. Actions are in learner space (see Transition).
class Learner {
public:
    virtual ~Learner() = default;

    virtual Algorithm algorithm() const = 0;
    /// Number of categories (DDQN) or 1 (TD3).
    virtual std::size_t action_count() const = 0;
    /// Action from the current snapshot. `explore` enables the exploration
    /// mechanism (Boltzmann sampling or Gaussian action noise).
    virtual double act(const State& s, bool explore, Rng& rng) = 0;
    /// One gradient step from a sampled batch; nullopt while the buffer holds
    /// fewer than batch_size transitions.
    virtual std::optional<TrainStats> train_step() = 0;
    virtual void publish_snapshot() = 0;
    virtual std::shared_ptr<const PolicySnapshot> current_snapshot() const = 0;
    virtual ReplayBuffer& buffer() = 0;
    virtual const LearnerConfig& config() const = 0;
    virtual void set_training_log(TrainingLog* log) { (void)log; }
};

}  // namespace smartchoices
