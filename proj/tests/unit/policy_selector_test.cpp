#include <cmath>

#include <gtest/gtest.h>

#include "smartchoices/policy_selector.hpp"

using namespace smartchoices;

TEST(Selector, FreshSelectorUsesInitial) {
    PolicySelector s({}, true);
    Rng rng(1);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(s.select(rng), PolicyTag::initial);
    EXPECT_EQ(s.p_learned(), 0.0);
}

TEST(Selector, FullProbabilityAlwaysLearned) {
    PolicySelector s({}, true);
    s.set_p_learned(1.0);
    Rng rng(1);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(s.select(rng), PolicyTag::learned);
}

TEST(Selector, NoInitialFunctionAlwaysLearned) {
    PolicySelector s({}, false);
    Rng rng(1);
    EXPECT_EQ(s.p_learned(), 1.0);
    s.report_return(PolicyTag::learned, -100.0);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(s.select(rng), PolicyTag::learned);
}

TEST(Selector, LearnedBetterReachesOneAfterTwenty) {
    PolicySelector s({}, true);
    s.report_return(PolicyTag::initial, -10.0);
    s.report_return(PolicyTag::learned, 0.0);
    s.set_p_learned(0.0);
    for (int i = 0; i < 19; ++i) {
        s.report_return(PolicyTag::learned, 0.0);
        EXPECT_LT(s.p_learned(), 1.0);
    }
    s.report_return(PolicyTag::learned, 0.0);
    EXPECT_NEAR(s.p_learned(), 1.0, 1e-12);
}

TEST(Selector, CollapseHalvesToFloor) {
    SelectorConfig cfg;
    cfg.ema_decay = 0.0;
    PolicySelector s(cfg, true);
    s.report_return(PolicyTag::initial, 0.0);
    s.set_p_learned(0.8);
    double expected = 0.8;
    for (int i = 0; i < 10; ++i) {
        s.report_return(PolicyTag::learned, -100.0);
        expected = std::max(cfg.p_min, expected * 0.5);
        EXPECT_DOUBLE_EQ(s.p_learned(), expected);
    }
    EXPECT_EQ(s.p_learned(), cfg.p_min);
}

TEST(Selector, EqualEmasCountAsSuccess) {
    PolicySelector s({}, true);
    s.report_return(PolicyTag::initial, -5.0);
    s.report_return(PolicyTag::learned, -5.0);
    const double p = s.p_learned();
    s.report_return(PolicyTag::learned, -5.0);
    EXPECT_GT(s.p_learned(), p);
    EXPECT_GT(s.margin(), 0.0);
}

TEST(Selector, UntriedLearnedGetsLifted) {
    PolicySelector s({}, true);
    s.report_return(PolicyTag::initial, -1.0);
    EXPECT_EQ(s.p_learned(), 0.05);
}

TEST(Selector, UsageRate) {
    PolicySelector s({}, true);
    EXPECT_EQ(s.usage_rate(10), 0.0);
    for (int i = 0; i < 5; ++i) s.report_return(PolicyTag::initial, 0.0);
    EXPECT_EQ(s.usage_rate(10), 1.0);
    for (int i = 0; i < 10; ++i) s.report_return(i % 2 ? PolicyTag::initial : PolicyTag::learned, 0.0);
    EXPECT_EQ(s.usage_rate(10), 0.5);
    EXPECT_THROW(s.usage_rate(0), ConfigError);
}

TEST(Selector, DecayForcesLearned) {
    SelectorConfig cfg;
    cfg.decay_enabled = true;
    cfg.decay_episodes = 10;
    PolicySelector s(cfg, true);
    for (int i = 0; i < 10; ++i) s.report_return(PolicyTag::initial, 0.0);
    EXPECT_EQ(s.p_learned(), 1.0);
}

TEST(Selector, SelectMatchesProbability) {
    PolicySelector s({}, true);
    s.set_p_learned(0.3);
    Rng rng(17);
    int learned = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) learned += s.select(rng) == PolicyTag::learned;
    EXPECT_NEAR(learned / static_cast<double>(n), 0.3, 0.015);
}

TEST(Selector, ProbabilityStaysInUnitInterval) {
    PolicySelector s({}, true);
    Rng rng(3);
    std::normal_distribution<double> n(0.0, 10.0);
    for (int i = 0; i < 2000; ++i) {
        s.report_return(s.select(rng), n(rng));
        EXPECT_GE(s.p_learned(), 0.0);
        EXPECT_LE(s.p_learned(), 1.0);
    }
}

TEST(Selector, ConfigValidation) {
    SelectorConfig cfg;
    cfg.ema_decay = 1.0;
    EXPECT_THROW(PolicySelector(cfg, true), ConfigError);
    cfg = {};
    cfg.p_min = 1.5;
    EXPECT_THROW(PolicySelector(cfg, true), ConfigError);
}

TEST(Selector, SafetyNetUnderAdversarialLearned) {
    PolicySelector s({}, true);
    Rng rng(8);
    bool risen = false;
    double prev = 0.0;
    for (int i = 0; i < 500; ++i) {
        const auto tag = s.select(rng);
        s.report_return(tag, tag == PolicyTag::initial ? 0.0 : -10.0);
        if (risen) {
            EXPECT_LE(s.p_learned(), prev);
            EXPECT_GE(s.p_learned(), s.config().p_min);
        }
        risen = risen || s.p_learned() > 0.0;
        prev = s.p_learned();
    }
    EXPECT_EQ(s.p_learned(), s.config().p_min);
}

TEST(Selector, TrajectoryIsDeterministic) {
    const auto run = [] {
        PolicySelector s({}, true);
        std::vector<double> ps;
        for (int i = 0; i < 200; ++i) {
            s.report_return(i % 3 ? PolicyTag::initial : PolicyTag::learned, std::sin(i));
            ps.push_back(s.p_learned());
        }
        return ps;
    };
    EXPECT_EQ(run(), run());
}
