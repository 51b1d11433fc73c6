// A three-way choice whose best arm depends on one observation.
// The initial function always answers 0; the learned policy should take over
// once it earns more.
//
//   ./context_bandit [episodes]

#include <cstdio>
#include <cstdlib>

#include "smartchoices/smart_choice.hpp"

using namespace smartchoices;

int main(int argc, char** argv) {
    const int episodes = argc > 1 ? std::atoi(argv[1]) : 1500;

    LearnerConfig cfg;
    cfg.batch_size = 64;
    cfg.lr_critic = 1e-2;
    cfg.tau = 0.01;
    cfg.temperature = 0.05;
    cfg.optimistic_q = 1.0;
    cfg.updates_per_episode = 32;
    cfg.seed = 7;

    SmartChoice choice(OutputDef::categorical(3), {ObservationDef::scalar("x", 0.0, 1.0)},
                       [](const State&) { return 0.0; }, cfg);

    Rng rng(11);
    double window_reward = 0.0;
    for (int e = 1; e <= episodes; ++e) {
        for (int step = 0; step < 10; ++step) {
            const double x = uniform01(rng);
            choice.observe("x", x);
            const auto arm = choice.predict_index();
            const auto best = static_cast<std::size_t>(x * 3.0);
            const double r = arm == best ? 1.0 : 0.0;
            choice.feedback(r);
            window_reward += r;
        }
        choice.end_episode();
        if (e % 100 == 0) {
            std::printf("episode %4d  reward/step %.2f  p_learned %.2f  initial usage %.2f\n", e,
                        window_reward / 1000.0, choice.selector().p_learned(), choice.selector().usage_rate(100));
            window_reward = 0.0;
        }
    }
    return 0;
}
