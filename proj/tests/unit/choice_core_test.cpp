#include <chrono>
#include <thread>

#include <gtest/gtest.h>

#include "smartchoices/smart_choice.hpp"

using namespace smartchoices;

namespace {

std::vector<ObservationDef> search_defs() {
    return {ObservationDef::scalar("low", 0, 10), ObservationDef::scalar("high", 0, 10),
            ObservationDef::scalar("target", 0, 10)};
}

LearnerConfig small_config() {
    LearnerConfig cfg;
    cfg.batch_size = 4;
    return cfg;
}

}  // namespace

TEST(ChoiceDefinition, ValidContinuousWithInitialFunction) {
    SmartChoice c(OutputDef::continuous(0, 1), search_defs(), [](const State&) { return 0.5; }, small_config());
    EXPECT_TRUE(c.has_initial_function());
    EXPECT_EQ(c.learner().algorithm(), Algorithm::td3);
}

TEST(ChoiceDefinition, CategoricalWithoutInitialIsLearnedOnly) {
    SmartChoice c(OutputDef::categorical(2), search_defs(), {}, small_config());
    EXPECT_EQ(c.learner().algorithm(), Algorithm::ddqn);
    EXPECT_EQ(c.selector().p_learned(), 1.0);
    c.predict();
    EXPECT_EQ(c.episode_policy(), PolicyTag::learned);
}

TEST(ChoiceDefinition, Errors) {
    const auto init = [](const State&) { return 0.5; };
    EXPECT_THROW(SmartChoice(OutputDef::continuous(1, 0), search_defs(), init, small_config()), DefinitionError);
    EXPECT_THROW(SmartChoice(OutputDef::categorical(1), search_defs(), {}, small_config()), DefinitionError);
    EXPECT_THROW(SmartChoice(OutputDef::continuous(0, 1), {ObservationDef::scalar("x", 0, 1), ObservationDef::scalar("x", 0, 1)},
                             init, small_config()),
                 DefinitionError);
    EXPECT_THROW(SmartChoice(OutputDef::continuous(0, 1), {ObservationDef::scalar("x", 2, 2)}, init, small_config()),
                 DefinitionError);
}

TEST(Observe, ManyAndOverwrite) {
    SmartChoice c(OutputDef::continuous(0, 1), search_defs(), [](const State&) { return 0.5; }, small_config());
    c.observe("low", 0.2);
    c.observe("low", 3.0);
    c.observe_many({{"high", 5.6}, {"target", 4.3}});
    const auto s = c.assemble_state();
    EXPECT_DOUBLE_EQ(s.dense[0], 0.3);
    EXPECT_DOUBLE_EQ(s.dense[1], 0.56);
    EXPECT_DOUBLE_EQ(s.dense[2], 0.43);
}

TEST(Observe, UndeclaredNameThrows) {
    SmartChoice c(OutputDef::continuous(0, 1), search_defs(), [](const State&) { return 0.5; }, small_config());
    EXPECT_THROW(c.observe("unknown", 1.0), ObservationError);
}

TEST(Observe, OutOfRangeIsClampedAndCounted) {
    SmartChoice c(OutputDef::continuous(0, 1), search_defs(), [](const State&) { return 0.5; }, small_config());
    c.observe("low", 12.0);
    c.observe("high", -1.0);
    EXPECT_EQ(c.clamp_count(), 2u);
    const auto s = c.assemble_state();
    EXPECT_EQ(s.dense[0], 1.0);
    EXPECT_EQ(s.dense[1], 0.0);
}

TEST(Assemble, NormalizationAndMissingFiller) {
    SmartChoice c(OutputDef::continuous(0, 1), search_defs(), [](const State&) { return 0.5; }, small_config());
    c.observe("low", 0.0);
    c.observe("target", 5.0);
    const auto s = c.assemble_state();
    EXPECT_EQ(s.dense, (std::vector<double>{0.0, 0.5, 0.5}));
    c.predict();
    EXPECT_EQ(c.missing_count(), 1u);
}

TEST(Assemble, KeysAndPadding) {
    const std::vector<ObservationDef> defs{ObservationDef::key("access", 10), ObservationDef::key("memory", 10, 3)};
    PendingObservations p;
    p.values = {std::vector<double>{4}, std::vector<double>{7, 2}};
    const auto s = assemble_state(p, defs);
    EXPECT_EQ(s.keys, (std::vector<std::int64_t>{4, 7, 2, kPaddingKey}));
    EXPECT_TRUE(s.dense.empty());
}

TEST(Predict, InitialFunctionValue) {
    SmartChoice c(OutputDef::continuous(0, 1), search_defs(), [](const State&) { return 0.5; }, small_config());
    EXPECT_EQ(c.predict(), 0.5);
    EXPECT_EQ(c.episode_policy(), PolicyTag::initial);
}

TEST(Predict, ActionScaling) {
    SmartChoice c(OutputDef::continuous(0, 1), search_defs(), {}, small_config());
    EXPECT_EQ(c.from_learner_action(0.0), 0.5);
    EXPECT_EQ(c.from_learner_action(-1.0), 0.0);
    EXPECT_EQ(c.from_learner_action(5.0), 1.0);
    EXPECT_EQ(c.to_learner_action(0.5), 0.0);
}

TEST(Predict, ContinuousOutputStaysInRange) {
    auto cfg = small_config();
    cfg.action_noise = 10.0;
    SmartChoice c(OutputDef::continuous(2, 3), search_defs(), {}, cfg);
    for (int i = 0; i < 200; ++i) {
        const double v = c.predict();
        EXPECT_GE(v, 2.0);
        EXPECT_LE(v, 3.0);
    }
}

TEST(Feedback, AccumulatesOnOpenTransition) {
    SmartChoice c(OutputDef::continuous(0, 1), search_defs(), [](const State&) { return 0.5; }, small_config());
    c.predict();
    c.feedback(-1);
    c.feedback(-1);
    EXPECT_EQ(c.open_transition()->reward, -2.0);
    c.predict();
    c.feedback(10);
    EXPECT_EQ(c.open_transition()->reward, 10.0);
    EXPECT_EQ(c.episode_log().back().reward, -2.0);
}

TEST(Feedback, BeforePredictIsDropped) {
    SmartChoice c(OutputDef::continuous(0, 1), search_defs(), [](const State&) { return 0.5; }, small_config());
    c.feedback(3.0);
    EXPECT_EQ(c.dropped_feedback_count(), 1u);
    EXPECT_FALSE(c.open_transition().has_value());
    EXPECT_TRUE(c.episode_log().empty());
}

TEST(Episode, ReturnAndBufferGrowth) {
    SmartChoice c(OutputDef::continuous(0, 1), search_defs(), [](const State&) { return 0.5; }, small_config());
    for (int i = 0; i < 3; ++i) {
        c.predict();
        c.feedback(-1);
    }
    EXPECT_EQ(c.end_episode(), -3.0);
    EXPECT_EQ(c.learner().buffer().size(), 3u);
    EXPECT_EQ(c.selector().ema_initial(), -3.0);

    for (int i = 0; i < 5; ++i) c.predict();
    c.end_episode();
    EXPECT_EQ(c.learner().buffer().size(), 8u);
}

TEST(Episode, EmptyIsNoop) {
    SmartChoice c(OutputDef::continuous(0, 1), search_defs(), [](const State&) { return 0.5; }, small_config());
    EXPECT_FALSE(c.end_episode().has_value());
    EXPECT_EQ(c.selector().episodes(), 0u);
    EXPECT_EQ(c.learner().buffer().size(), 0u);
}

TEST(Episode, TransitionsChainAndTerminate) {
    SmartChoice c(OutputDef::continuous(0, 1), search_defs(), [](const State&) { return 0.5; }, small_config());
    c.observe("low", 1.0);
    c.predict();
    c.observe("low", 2.0);
    c.predict();
    c.end_episode();
    const auto t = c.learner().buffer().contents();
    ASSERT_EQ(t.size(), 2u);
    EXPECT_EQ(t[0].next_state, t[1].state);
    EXPECT_FALSE(t[0].terminal);
    EXPECT_TRUE(t[1].terminal);
}

TEST(Episode, ScoreOverridesSelectorInput) {
    SmartChoice c(OutputDef::continuous(0, 1), search_defs(), [](const State&) { return 0.5; }, small_config());
    c.predict();
    c.feedback(-5);
    EXPECT_EQ(c.end_episode(-0.25), -5.0);
    EXPECT_EQ(c.selector().ema_initial(), -0.25);
}

TEST(Episode, AbandonStoresNothing) {
    SmartChoice c(OutputDef::continuous(0, 1), search_defs(), [](const State&) { return 0.5; }, small_config());
    c.predict();
    c.predict();
    c.abandon_episode();
    EXPECT_FALSE(c.end_episode().has_value());
    EXPECT_EQ(c.learner().buffer().size(), 0u);
}

TEST(InitialMode, MatchesInitialFunctionExactly) {
    const auto init = [](const State& s) { return 0.25 + 0.5 * s.dense[0]; };
    SmartChoice c(OutputDef::continuous(0, 1), search_defs(), init, small_config());
    c.force_policy(PolicyTag::initial);
    for (int ep = 0; ep < 20; ++ep) {
        for (int i = 0; i < 5; ++i) {
            const double low = 0.37 * i + ep * 0.1;
            c.observe("low", low);
            const double expected = init(State{{low / 10.0, 0.5, 0.5}, {}});
            EXPECT_EQ(c.predict(), expected);
            c.feedback(-1);
        }
        c.end_episode();
    }
    EXPECT_EQ(c.selector().usage_rate(100), 1.0);
}

TEST(InitialMode, CategoricalRejectsOutOfRangeInitial) {
    SmartChoice c(OutputDef::categorical(3), search_defs(), [](const State&) { return 7.0; }, small_config());
    EXPECT_THROW(c.predict(), DefinitionError);
}

TEST(Training, SynchronousStepsPublishSnapshots) {
    SmartChoice c(OutputDef::categorical(2), search_defs(), {}, small_config());
    const auto v0 = c.learner().current_snapshot()->version;
    for (int ep = 0; ep < 3; ++ep) {
        for (int i = 0; i < 4; ++i) {
            c.predict();
            c.feedback(1);
        }
        c.end_episode();
    }
    EXPECT_GT(c.learner().current_snapshot()->version, v0);
}

TEST(Training, AsyncTrainingServesSnapshots) {
    SmartChoice c(OutputDef::categorical(2), search_defs(), {}, small_config());
    c.start_async_training(1);
    for (int ep = 0; ep < 50; ++ep) {
        for (int i = 0; i < 4; ++i) {
            const auto a = c.predict_index();
            EXPECT_LT(a, 2u);
            c.feedback(a == 1 ? 1.0 : 0.0);
        }
        c.end_episode();
    }
    // The trainer may not have been scheduled yet on a busy machine.
    for (int i = 0; i < 5000 && c.learner().current_snapshot()->version <= 1; ++i)
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
    c.stop_async_training();
    EXPECT_GT(c.learner().current_snapshot()->version, 1u);
}
