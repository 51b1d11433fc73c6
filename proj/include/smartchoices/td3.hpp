#pragma once

// Twin-delayed deterministic policy gradient for continuous SmartChoices.
//
// Actor output is tanh-squashed to (-1, 1); the SmartChoice maps it onto the
// declared output range. Critic targets use the smaller of two target critics
// evaluated at a smoothed target action:
//   a' = clip(actor_t(s') + clip(N(0, sigma_t), -2 sigma_t, 2 sigma_t), -1, 1)
//   y  = r + discount * min(Q1_t, Q2_t)(s', a')
// A key embedding, when present, is shared by actor and critics.

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <vector>

#include "smartchoices/learner.hpp"

namespace smartchoices {

class Td3Learner final : public Learner {
public:
    Td3Learner(InputLayout layout, LearnerConfig cfg)
        : cfg_(std::move(cfg)), encoder_(layout, cfg_.embedding_size), buffer_(cfg_.buffer_capacity),
          rng_(derive_seed(cfg_.seed, 0x7d3)) {
        cfg_.validate();
        Rng init(derive_seed(cfg_.seed, 0x1417));
        auto actor_specs = nn::parse_layers(cfg_.actor_layers);
        actor_specs.push_back({1, nn::Activation::tanh});
        auto critic_specs = nn::parse_layers(cfg_.critic_layers);
        critic_specs.push_back({1, nn::Activation::identity});
        const std::size_t w = encoder_.state_width();
        actor_ = nn::Mlp(w, actor_specs, init);
        critic1_ = nn::Mlp(w + 1, critic_specs, init);
        critic2_ = nn::Mlp(w + 1, critic_specs, init);
        actor_t_ = actor_;
        critic1_t_ = critic1_;
        critic2_t_ = critic2_;
        actor_g_ = actor_.zeros_like();
        critic1_g_ = critic1_.zeros_like();
        critic2_g_ = critic2_.zeros_like();
        scratch_g_ = critic1_.zeros_like();
        if (layout.key_slots > 0) {
            embedding_ = nn::Embedding(layout.key_space, cfg_.embedding_size, init);
            embedding_t_ = *embedding_;
            emb_g_.width = cfg_.embedding_size;
        }
        actor_opt_ = nn::Adam(cfg_.lr_actor);
        critic1_opt_ = nn::Adam(cfg_.lr_critic);
        critic2_opt_ = nn::Adam(cfg_.lr_critic);
        emb_critic_opt_ = nn::SparseAdam(cfg_.lr_critic);
        emb_actor_opt_ = nn::SparseAdam(cfg_.lr_actor);
        publish_snapshot();
    }

    Algorithm algorithm() const override { return Algorithm::td3; }
    std::size_t action_count() const override { return 1; }
    ReplayBuffer& buffer() override { return buffer_; }
    const LearnerConfig& config() const override { return cfg_; }
    void set_training_log(TrainingLog* log) override { log_ = log; }

    /// Deterministic actor output of the current snapshot, in (-1, 1).
    double actor_output(const State& s) {
        auto snap = slot_.load();
        x_one_.resize(encoder_.state_width());
        encoder_.encode_row(s, snap->embedding ? &*snap->embedding : nullptr, x_one_.data());
        return snap->network.forward_one(x_one_, ws_)[0];
    }

    double act(const State& s, bool explore, Rng& rng) override {
        double a = actor_output(s);
        if (explore && cfg_.action_noise > 0.0) a += std::normal_distribution<double>(0.0, cfg_.action_noise)(rng);
        return std::clamp(a, -1.0, 1.0);
    }

    /// Online critic estimates (Q1, Q2) for a state-action pair.
    std::pair<double, double> critic_values(const State& s, double action) const {
        const std::vector<double> acts{action};
        const auto get = [&](std::size_t) -> const State& { return s; };
        const auto x = encoder_.encode(1, get, embedding_ ? &*embedding_ : nullptr, &acts);
        return {critic1_.forward(x)(0, 0), critic2_.forward(x)(0, 0)};
    }

    struct Targets {
        std::vector<double> y;
        std::vector<double> q1;  ///< r + discount * Q1_t alone (for diagnostics)
        std::vector<double> q2;
    };

    /// Critic regression targets; target-policy noise is drawn from `rng`.
    Targets compute_targets(const std::vector<Transition>& batch, Rng& rng) const {
        const std::size_t n = batch.size();
        Targets t;
        t.y.resize(n);
        for (std::size_t i = 0; i < n; ++i) t.y[i] = batch[i].reward;
        t.q1 = t.y;
        t.q2 = t.y;
        if (cfg_.discount == 0.0) return t;
        const auto next = [&](std::size_t i) -> const State& { return batch[i].next_state; };
        const nn::Embedding* emb_t = embedding_t_ ? &*embedding_t_ : nullptr;
        auto& sc = scratch_;
        encoder_.encode_into(n, next, emb_t, nullptr, sc.xs);
        const auto& a_t = actor_t_.forward(sc.xs, sc.actor);
        std::vector<double> acts(n);
        const double bound = 2.0 * cfg_.target_noise;
        std::normal_distribution<double> noise(0.0, cfg_.target_noise > 0.0 ? cfg_.target_noise : 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double eps = cfg_.target_noise > 0.0 ? std::clamp(noise(rng), -bound, bound) : 0.0;
            acts[i] = std::clamp(a_t(i, 0) + eps, -1.0, 1.0);
        }
        encoder_.encode_into(n, next, emb_t, &acts, sc.xa);
        const auto& q1 = critic1_t_.forward(sc.xa, sc.critic1);
        const auto& q2 = critic2_t_.forward(sc.xa, sc.critic2);
        for (std::size_t i = 0; i < n; ++i) {
            if (batch[i].terminal) continue;
            t.q1[i] += cfg_.discount * q1(i, 0);
            t.q2[i] += cfg_.discount * q2(i, 0);
            t.y[i] += cfg_.discount * std::min(q1(i, 0), q2(i, 0));
        }
        return t;
    }

    std::optional<TrainStats> train_step() override {
        if (!buffer_.sample_into(cfg_.batch_size, rng_, batch_)) return std::nullopt;
        return update(batch_);
    }

    TrainStats update(const std::vector<Transition>& batch) {
        const std::size_t n = batch.size();
        const double inv_n = 1.0 / static_cast<double>(n);
        const auto y = compute_targets(batch, rng_).y;
        const auto cur = [&](std::size_t i) -> const State& { return batch[i].state; };
        const nn::Embedding* emb = embedding_ ? &*embedding_ : nullptr;

        // Critics.
        std::vector<double> acts(n);
        for (std::size_t i = 0; i < n; ++i) acts[i] = batch[i].action;
        encoder_.encode_into(n, cur, emb, &acts, xa_);
        const auto& q1 = critic1_.forward(xa_, cache1_);
        const auto& q2 = critic2_.forward(xa_, cache2_);
        nn::Matrix d1(n, 1), d2(n, 1);
        double l = 0.0, mean_q = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e1 = q1(i, 0) - y[i];
            const double e2 = q2(i, 0) - y[i];
            l += 0.5 * (e1 * e1 + e2 * e2);
            mean_q += q1(i, 0);
            d1(i, 0) = 2.0 * e1 * inv_n;
            d2(i, 0) = 2.0 * e2 * inv_n;
        }
        critic1_g_.set_zero();
        critic2_g_.set_zero();
        emb_g_.clear();
        const auto& dx1 = critic1_.backward(cache1_, d1, critic1_g_);
        const auto& dx2 = critic2_.backward(cache2_, d2, critic2_g_);
        encoder_.scatter_key_grads(n, cur, dx1, emb_g_);
        encoder_.scatter_key_grads(n, cur, dx2, emb_g_);
        auto gv = critic1_g_.parameters();
        for (auto& p : critic2_g_.parameters()) gv.push_back(p);
        nn::clip_global_norm(gv, cfg_.grad_clip_norm, emb ? &emb_g_ : nullptr);
        critic1_opt_.step(critic1_.parameters(), critic1_g_.parameters());
        critic2_opt_.step(critic2_.parameters(), critic2_g_.parameters());
        if (embedding_) emb_critic_opt_.step(*embedding_, emb_g_);

        ++steps_;
        if (steps_ % cfg_.update_period == 0) {
            update_actor(batch);
            nn::soft_update(actor_t_, actor_, cfg_.tau);
            nn::soft_update(critic1_t_, critic1_, cfg_.tau);
            nn::soft_update(critic2_t_, critic2_, cfg_.tau);
            if (embedding_) nn::soft_update(*embedding_t_, *embedding_, cfg_.tau);
        }
        TrainStats stats{steps_, l * inv_n, mean_q * inv_n};
        if (log_) log_->write(stats);
        return stats;
    }

    void publish_snapshot() override {
        auto s = std::make_shared<PolicySnapshot>();
        s->network = actor_;
        s->embedding = embedding_;
        s->version = ++version_;
        slot_.publish(std::move(s));
    }

    std::shared_ptr<const PolicySnapshot> current_snapshot() const override { return slot_.load(); }

    const nn::Mlp& actor() const { return actor_; }
    const nn::Mlp& critic1() const { return critic1_; }
    const nn::Mlp& critic2() const { return critic2_; }
    std::uint64_t steps() const { return steps_; }

private:
    // Ascends Q1(s, actor(s)).
    void update_actor(const std::vector<Transition>& batch) {
        const std::size_t n = batch.size();
        const auto cur = [&](std::size_t i) -> const State& { return batch[i].state; };
        const nn::Embedding* emb = embedding_ ? &*embedding_ : nullptr;
        encoder_.encode_into(n, cur, emb, nullptr, xs_);
        const auto& a = actor_.forward(xs_, actor_cache_);
        std::vector<double> acts(n);
        for (std::size_t i = 0; i < n; ++i) acts[i] = a(i, 0);
        encoder_.encode_into(n, cur, emb, &acts, xa_);
        critic1_.forward(xa_, cache1_);
        nn::Matrix up(n, 1, -1.0 / static_cast<double>(n));
        scratch_g_.set_zero();
        const auto& dxa = critic1_.backward(cache1_, up, scratch_g_);
        nn::Matrix da(n, 1);
        const std::size_t action_col = encoder_.state_width();
        for (std::size_t i = 0; i < n; ++i) da(i, 0) = dxa(i, action_col);
        actor_g_.set_zero();
        emb_g_.clear();
        std::optional<nn::Matrix> preact;
        if (cfg_.actor_preact_l2 > 0.0) {
            preact.emplace(n, 1);
            constexpr double edge = 1.0 - 1e-9;
            for (std::size_t i = 0; i < n; ++i)
                (*preact)(i, 0) = 2.0 * cfg_.actor_preact_l2 * std::atanh(std::clamp(a(i, 0), -edge, edge)) /
                                  static_cast<double>(n);
        }
        const auto& dxs = actor_.backward(actor_cache_, da, actor_g_, preact ? &*preact : nullptr);
        if (embedding_) {
            encoder_.scatter_key_grads(n, cur, dxs, emb_g_);
            // Also through the critic's state columns.
            nn::Matrix state_part(n, action_col);
            for (std::size_t i = 0; i < n; ++i)
                std::copy(dxa.row(i), dxa.row(i) + action_col, state_part.row(i));
            encoder_.scatter_key_grads(n, cur, state_part, emb_g_);
        }
        const auto gv = actor_g_.parameters();
        nn::clip_global_norm(gv, cfg_.grad_clip_norm, emb ? &emb_g_ : nullptr);
        actor_opt_.step(actor_.parameters(), gv);
        if (embedding_) emb_actor_opt_.step(*embedding_, emb_g_);
    }

    LearnerConfig cfg_;
    Encoder encoder_;
    ReplayBuffer buffer_;
    Rng rng_;
    nn::Mlp actor_, critic1_, critic2_;
    nn::Mlp actor_t_, critic1_t_, critic2_t_;
    nn::Mlp actor_g_, critic1_g_, critic2_g_, scratch_g_;
    std::optional<nn::Embedding> embedding_, embedding_t_;
    nn::SparseRowGrads emb_g_;
    nn::Adam actor_opt_, critic1_opt_, critic2_opt_;
    nn::SparseAdam emb_critic_opt_, emb_actor_opt_;
    std::vector<Transition> batch_;
    nn::ForwardCache cache1_, cache2_, actor_cache_;
    nn::Matrix xs_, xa_;
    // Target computation buffers (compute_targets is logically const).
    struct TargetScratch {
        nn::Matrix xs, xa;
        nn::ForwardCache actor, critic1, critic2;
    };
    mutable TargetScratch scratch_;
    nn::Workspace ws_;
    std::vector<double> x_one_;
    SnapshotSlot slot_;
    std::uint64_t steps_ = 0;
    std::uint64_t version_ = 0;
    TrainingLog* log_ = nullptr;
};

}  // namespace smartchoices
