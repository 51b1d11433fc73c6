// Replays one access trace through LRU, Belady and a continuous-score cache
// whose policy is pinned to its initial function (zero offset, i.e. LRU).

#include <cstdio>

#include "smartchoices/env/cache.hpp"

using namespace smartchoices;
using namespace smartchoices::env;

int main() {
    const auto trace = make_access_trace(2024, 0.5, 1000, 100);
    const auto lru = lru_simulate(trace.keys, 10);
    const auto opt = oracle_simulate(trace.keys, 10);

    CacheOptions o;
    LearnerConfig cfg;
    auto choice = make_cache_choice(CacheVariant::continuous, o, cfg);
    choice->force_policy(PolicyTag::initial);
    const auto smart = run_cache(trace, *choice, CacheVariant::continuous, o);

    std::printf("misses  lru %zu  belady %zu  smartchoice(initial) %zu\n", lru.misses, opt.misses, smart.misses);
    return 0;
}
