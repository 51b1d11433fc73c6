#pragma once

// Double DQN for categorical SmartChoices.
//
// The online network picks the next action, the target network evaluates it:
//   y = r + discount * Q_target(s', argmax_a Q_online(s', a))   (non-terminal)
//   y = r                                                         (terminal)
// Exploration samples from softmax(Q / temperature).

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <vector>

#include "smartchoices/learner.hpp"

namespace smartchoices {

/// softmax(q / temperature). temperature == 0 puts all mass on the first argmax.
inline std::vector<double> boltzmann_probabilities(std::span<const double> q, double temperature) {
    std::vector<double> p(q.size(), 0.0);
    if (q.empty()) return p;
    const auto best = static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin());
    if (temperature <= 0.0) {
        p[best] = 1.0;
        return p;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        p[i] = std::exp((q[i] - q[best]) / temperature);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

inline std::size_t argmax(std::span<const double> q) {
    return static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin());
}

inline std::size_t sample_boltzmann(std::span<const double> q, double temperature, Rng& rng) {
    if (temperature <= 0.0) return argmax(q);
    const auto p = boltzmann_probabilities(q, temperature);
    double u = uniform01(rng);
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (u < p[i]) return i;
        u -= p[i];
    }
    return argmax(q);
}

class DdqnLearner final : public Learner {
public:
    DdqnLearner(InputLayout layout, std::size_t actions, LearnerConfig cfg)
        : cfg_(std::move(cfg)), actions_(actions), encoder_(layout, cfg_.embedding_size), buffer_(cfg_.buffer_capacity),
          rng_(derive_seed(cfg_.seed, 0xdd)) {
        cfg_.validate();
        if (actions_ < 2) throw DefinitionError("DDQN needs at least 2 actions");
        auto specs = nn::parse_layers(cfg_.critic_layers);
        specs.push_back({actions_, nn::Activation::identity});
        Rng init(derive_seed(cfg_.seed, 0x1417));
        online_ = nn::Mlp(encoder_.state_width(), specs, init);
        if (cfg_.optimistic_q != 0.0) {
            // Zero output weights keep an untried action at exactly optimistic_q:
            // only the taken action's row receives gradient.
            auto& out = online_.layers().back();
            std::fill(out.weight.begin(), out.weight.end(), 0.0);
            std::fill(out.bias.begin(), out.bias.end(), cfg_.optimistic_q);
        }
        target_ = online_;
        grads_ = online_.zeros_like();
        if (layout.key_slots > 0) {
            embedding_ = nn::Embedding(layout.key_space, cfg_.embedding_size, init);
            target_embedding_ = *embedding_;
            emb_grads_.width = cfg_.embedding_size;
        }
        opt_ = nn::Adam(cfg_.lr_critic);
        emb_opt_ = nn::SparseAdam(cfg_.lr_critic);
        publish_snapshot();
    }

    Algorithm algorithm() const override { return Algorithm::ddqn; }
    std::size_t action_count() const override { return actions_; }
    ReplayBuffer& buffer() override { return buffer_; }
    const LearnerConfig& config() const override { return cfg_; }
    void set_training_log(TrainingLog* log) override { log_ = log; }

    /// Q-values of the current snapshot.
    std::vector<double> q_values(const State& s) {
        auto snap = slot_.load();
        std::vector<double> x(encoder_.state_width());
        encoder_.encode_row(s, snap->embedding ? &*snap->embedding : nullptr, x.data());
        auto q = snap->network.forward_one(x, ws_);
        return {q.begin(), q.end()};
    }

    double act(const State& s, bool explore, Rng& rng) override {
        const auto q = q_values(s);
        return static_cast<double>(explore ? sample_boltzmann(q, cfg_.temperature, rng) : argmax(q));
    }

    /// Regression targets for `batch` under the current online/target networks.
    std::vector<double> compute_targets(const std::vector<Transition>& batch) const {
        std::vector<double> y(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) y[i] = batch[i].reward;
        if (cfg_.discount == 0.0) return y;
        const auto next = [&](std::size_t i) -> const State& { return batch[i].next_state; };
        encoder_.encode_into(batch.size(), next, embedding_ ? &*embedding_ : nullptr, nullptr, scratch_.x_online);
        encoder_.encode_into(batch.size(), next, target_embedding_ ? &*target_embedding_ : nullptr, nullptr,
                             scratch_.x_target);
        const auto& q_online = online_.forward(scratch_.x_online, scratch_.online);
        const auto& q_target = target_.forward(scratch_.x_target, scratch_.target);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            if (batch[i].terminal) continue;
            const auto a = argmax(std::span<const double>(q_online.row(i), actions_));
            y[i] += cfg_.discount * q_target(i, a);
        }
        return y;
    }

    /// Mean squared TD error on `batch` without updating anything.
    double loss(const std::vector<Transition>& batch) const {
        const auto y = compute_targets(batch);
        const auto cur = [&](std::size_t i) -> const State& { return batch[i].state; };
        const auto q = online_.forward(encoder_.encode(batch.size(), cur, embedding_ ? &*embedding_ : nullptr));
        double l = 0.0;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const double d = q(i, action_index(batch[i])) - y[i];
            l += d * d;
        }
        return l / static_cast<double>(batch.size());
    }

    std::optional<TrainStats> train_step() override {
        if (!buffer_.sample_into(cfg_.batch_size, rng_, batch_)) return std::nullopt;
        return update(batch_);
    }

    /// One gradient step on an explicit batch.
    TrainStats update(const std::vector<Transition>& batch) {
        const std::size_t n = batch.size();
        const auto y = compute_targets(batch);
        const auto cur = [&](std::size_t i) -> const State& { return batch[i].state; };
        encoder_.encode_into(n, cur, embedding_ ? &*embedding_ : nullptr, nullptr, x_);
        const auto& q = online_.forward(x_, cache_);

        nn::Matrix dq(n, actions_);
        double l = 0.0;
        double mean_q = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto a = action_index(batch[i]);
            const double d = q(i, a) - y[i];
            l += d * d;
            mean_q += q(i, a);
            dq(i, a) = 2.0 * d / static_cast<double>(n);
        }
        grads_.set_zero();
        emb_grads_.clear();
        const auto& dx = online_.backward(cache_, dq, grads_);
        encoder_.scatter_key_grads(n, cur, dx, emb_grads_);
        const auto gv = grads_.parameters();
        nn::clip_global_norm(gv, cfg_.grad_clip_norm, embedding_ ? &emb_grads_ : nullptr);
        opt_.step(online_.parameters(), gv);
        if (embedding_) emb_opt_.step(*embedding_, emb_grads_);

        ++steps_;
        if (steps_ % cfg_.update_period == 0) {
            nn::soft_update(target_, online_, cfg_.tau);
            if (embedding_) nn::soft_update(*target_embedding_, *embedding_, cfg_.tau);
        }
        TrainStats stats{steps_, l / static_cast<double>(n), mean_q / static_cast<double>(n)};
        if (log_) log_->write(stats);
        return stats;
    }

    void publish_snapshot() override {
        auto s = std::make_shared<PolicySnapshot>();
        s->network = online_;
        s->embedding = embedding_;
        s->version = ++version_;
        slot_.publish(std::move(s));
    }

    std::shared_ptr<const PolicySnapshot> current_snapshot() const override { return slot_.load(); }

    const nn::Mlp& online_network() const { return online_; }
    const nn::Mlp& target_network() const { return target_; }
    std::uint64_t steps() const { return steps_; }

private:
    std::size_t action_index(const Transition& t) const {
        const auto a = static_cast<long long>(std::llround(t.action));
        if (a < 0 || static_cast<std::size_t>(a) >= actions_) throw ShapeError("transition action out of range");
        return static_cast<std::size_t>(a);
    }

    LearnerConfig cfg_;
    std::size_t actions_;
    Encoder encoder_;
    ReplayBuffer buffer_;
    Rng rng_;
    nn::Mlp online_, target_, grads_;
    std::optional<nn::Embedding> embedding_, target_embedding_;
    nn::SparseRowGrads emb_grads_;
    nn::Adam opt_;
    nn::SparseAdam emb_opt_;
    std::vector<Transition> batch_;
    nn::ForwardCache cache_;
    nn::Matrix x_;
    // Target computation buffers (compute_targets is logically const).
    struct TargetScratch {
        nn::Matrix x_online, x_target;
        nn::ForwardCache online, target;
    };
    mutable TargetScratch scratch_;
    nn::Workspace ws_;
    SnapshotSlot slot_;
    std::uint64_t steps_ = 0;
    std::uint64_t version_ = 0;
    TrainingLog* log_ = nullptr;
};

}  // namespace smartchoices
