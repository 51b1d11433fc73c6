#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "smartchoices/ddqn.hpp"
#include "smartchoices/td3.hpp"

using namespace smartchoices;

namespace {

Transition make_transition(double x, double action, double reward, bool terminal = false) {
    Transition t;
    t.state.dense = {x};
    t.next_state.dense = {x * 0.5};
    t.action = action;
    t.reward = reward;
    t.terminal = terminal;
    return t;
}

InputLayout dense(std::size_t w) {
    InputLayout l;
    l.dense_width = w;
    return l;
}

}  // namespace

TEST(ReplayBuffer, FifoAtCapacity) {
    ReplayBuffer buf(20000);
    for (int i = 0; i < 20001; ++i) buf.push(make_transition(0, 0, i));
    EXPECT_EQ(buf.size(), 20000u);
    EXPECT_EQ(buf.total_pushed(), 20001u);
    const auto all = buf.contents();
    EXPECT_EQ(all.front().reward, 1.0);
    EXPECT_EQ(all.back().reward, 20000.0);
}

TEST(ReplayBuffer, NotReadyWhenTooSmall) {
    ReplayBuffer buf(1000);
    for (int i = 0; i < 100; ++i) buf.push(make_transition(0, 0, i));
    Rng rng(1);
    EXPECT_FALSE(buf.sample(256, rng).has_value());
    std::vector<Transition> out;
    EXPECT_FALSE(buf.sample_into(256, rng, out));
    EXPECT_TRUE(out.empty());
    EXPECT_TRUE(buf.sample(100, rng).has_value());
}

TEST(ReplayBuffer, SamplesUniformly) {
    ReplayBuffer buf(10);
    for (int i = 0; i < 10; ++i) buf.push(make_transition(0, 0, i));
    Rng rng(7);
    std::map<int, int> counts;
    const int draws = 20000;
    for (int i = 0; i < draws / 10; ++i) {
        const auto batch = buf.sample(10, rng);
        ASSERT_TRUE(batch.has_value());
        for (const auto& t : *batch) ++counts[static_cast<int>(t.reward)];
    }
    double chi2 = 0.0;
    const double expected = draws / 10.0;
    for (int k = 0; k < 10; ++k) chi2 += (counts[k] - expected) * (counts[k] - expected) / expected;
    // 9 degrees of freedom, p = 0.001 critical value
    EXPECT_LT(chi2, 27.88);
}

TEST(Boltzmann, SymmetricQ) {
    const std::vector<double> q{0.0, 0.0};
    const auto p = boltzmann_probabilities(q, 0.1);
    EXPECT_DOUBLE_EQ(p[0], 0.5);
    EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(Boltzmann, SoftmaxArithmetic) {
    const std::vector<double> q{1.0, 2.0};
    const auto p = boltzmann_probabilities(q, 0.1);
    EXPECT_NEAR(p[1], 1.0 / (1.0 + std::exp(-10.0)), 1e-12);
    EXPECT_NEAR(p[1], 0.9999546, 1e-7);
}

TEST(Boltzmann, ZeroTemperatureIsArgmax) {
    const std::vector<double> q{1.0, 2.0};
    Rng rng(3);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_boltzmann(q, 0.0, rng), 1u);
    EXPECT_EQ(boltzmann_probabilities(q, 1e-6)[1], 1.0);
}

TEST(Boltzmann, ProbabilitiesSumToOne) {
    Rng rng(5);
    std::normal_distribution<double> n(0.0, 5.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> q(8);
        for (auto& v : q) v = n(rng);
        double sum = 0.0;
        for (double p : boltzmann_probabilities(q, 0.1 + trial * 0.1)) {
            EXPECT_GE(p, 0.0);
            sum += p;
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Ddqn, ZeroDiscountTargetIgnoresNextState) {
    LearnerConfig cfg;
    cfg.algorithm = Algorithm::ddqn;
    cfg.discount = 0.0;
    DdqnLearner learner(dense(1), 3, cfg);
    auto a = make_transition(0.3, 1, 1.0);
    auto b = a;
    b.next_state.dense = {-9.0};
    EXPECT_EQ(learner.compute_targets({a, b}), (std::vector<double>{1.0, 1.0}));
}

TEST(Ddqn, TerminalTargetIsReward) {
    LearnerConfig cfg;
    cfg.discount = 0.8;
    DdqnLearner learner(dense(1), 3, cfg);
    const auto y = learner.compute_targets({make_transition(0.3, 2, -1.0, true), make_transition(0.3, 2, -1.0, false)});
    EXPECT_EQ(y[0], -1.0);
    EXPECT_NE(y[1], -1.0);
}

TEST(Ddqn, GreedyActIsArgmax) {
    LearnerConfig cfg;
    DdqnLearner learner(dense(2), 4, cfg);
    State s{{0.2, 0.9}, {}};
    const auto q = learner.q_values(s);
    Rng rng(1);
    EXPECT_EQ(learner.act(s, false, rng), static_cast<double>(argmax(q)));
}

TEST(Ddqn, OptimisticInitialQ) {
    LearnerConfig cfg;
    cfg.optimistic_q = 6.0;
    DdqnLearner learner(dense(2), 3, cfg);
    for (double q : learner.q_values(State{{0.1, 0.7}, {}})) EXPECT_EQ(q, 6.0);
}

TEST(Ddqn, UpdateReducesLossOnFixedBatch) {
    LearnerConfig cfg;
    cfg.lr_critic = 1e-2;
    DdqnLearner learner(dense(1), 2, cfg);
    std::vector<Transition> batch;
    for (int i = 0; i < 32; ++i) batch.push_back(make_transition(i / 32.0, i % 2, i % 2 ? 1.0 : -1.0));
    const double before = learner.loss(batch);
    for (int i = 0; i < 200; ++i) learner.update(batch);
    EXPECT_LT(learner.loss(batch), before * 0.5);
}

TEST(Ddqn, SnapshotIsImmutable) {
    LearnerConfig cfg;
    cfg.batch_size = 4;
    DdqnLearner learner(dense(1), 2, cfg);
    const auto init = learner.online_network();
    const auto old = learner.current_snapshot();
    EXPECT_TRUE(old->network == init);
    const auto copy = old->network;
    for (int i = 0; i < 8; ++i) learner.buffer().push(make_transition(0.1 * i, i % 2, 1.0));
    ASSERT_TRUE(learner.train_step().has_value());
    learner.publish_snapshot();
    EXPECT_TRUE(old->network == copy);
    EXPECT_FALSE(learner.current_snapshot()->network == copy);
    EXPECT_GT(learner.current_snapshot()->version, old->version);
}

TEST(Ddqn, TrainStepNotReady) {
    LearnerConfig cfg;
    DdqnLearner learner(dense(1), 2, cfg);
    learner.buffer().push(make_transition(0, 0, 0));
    EXPECT_FALSE(learner.train_step().has_value());
}

TEST(Ddqn, RejectsSingleAction) {
    EXPECT_THROW(DdqnLearner(dense(1), 1, LearnerConfig{}), DefinitionError);
}

TEST(Td3, ZeroDiscountTargetIsReward) {
    LearnerConfig cfg;
    cfg.discount = 0.0;
    Td3Learner learner(dense(1), cfg);
    Rng rng(1);
    const auto t = learner.compute_targets({make_transition(0.2, 0.3, 2.5)}, rng);
    EXPECT_EQ(t.y[0], 2.5);
}

TEST(Td3, TargetIsMinOfCritics) {
    LearnerConfig cfg;
    cfg.discount = 0.8;
    Td3Learner learner(dense(1), cfg);
    Rng rng(2);
    std::vector<Transition> batch;
    for (int i = 0; i < 64; ++i) batch.push_back(make_transition(i / 64.0, 0.0, 1.0));
    const auto t = learner.compute_targets(batch, rng);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        EXPECT_LE(t.y[i], t.q1[i]);
        EXPECT_LE(t.y[i], t.q2[i]);
        EXPECT_EQ(t.y[i], std::min(t.q1[i], t.q2[i]));
    }
}

TEST(Td3, TerminalTargetIsReward) {
    LearnerConfig cfg;
    cfg.discount = 0.8;
    Td3Learner learner(dense(1), cfg);
    Rng rng(2);
    EXPECT_EQ(learner.compute_targets({make_transition(0.5, 0.0, -1.0, true)}, rng).y[0], -1.0);
}

TEST(Td3, ActionsStayInRangeUnderLargeNoise) {
    LearnerConfig cfg;
    cfg.action_noise = 50.0;
    Td3Learner learner(dense(1), cfg);
    Rng rng(4);
    for (int i = 0; i < 1000; ++i) {
        const double a = learner.act(State{{0.5}, {}}, true, rng);
        EXPECT_GE(a, -1.0);
        EXPECT_LE(a, 1.0);
    }
    const double out = learner.actor_output(State{{0.5}, {}});
    EXPECT_GT(out, -1.0);
    EXPECT_LT(out, 1.0);
}

TEST(Td3, EmbeddingInputTrains) {
    InputLayout l;
    l.dense_width = 1;
    l.key_slots = 1;
    l.key_space = 5;
    LearnerConfig cfg;
    cfg.batch_size = 8;
    Td3Learner learner(l, cfg);
    for (int i = 0; i < 16; ++i) {
        Transition t;
        t.state = {{0.5}, {i % 5}};
        t.next_state = t.state;
        t.action = 0.1;
        t.reward = 1.0;
        learner.buffer().push(t);
    }
    const auto before = learner.current_snapshot();
    ASSERT_TRUE(learner.train_step().has_value());
    learner.publish_snapshot();
    EXPECT_TRUE(learner.current_snapshot()->embedding.has_value());
    EXPECT_EQ(before->tensors().size(), learner.current_snapshot()->tensors().size());
}

TEST(LearnerConfig, Validation) {
    LearnerConfig cfg;
    cfg.discount = 1.5;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.tau = -0.1;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.lr_critic = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.batch_size = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    EXPECT_NO_THROW(LearnerConfig{}.validate());
}
