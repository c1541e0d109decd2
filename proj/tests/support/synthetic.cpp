#include "support/synthetic.hpp"

#include <algorithm>
#include <random>
#include <vector>

namespace capsim::testing {

ContactTrace make_synthetic_trace(const SyntheticSpec& spec) {
    std::mt19937_64 rng(spec.seed);
    ContactTrace trace;
    trace.n = spec.n;
    trace.duration = spec.duration;

    const std::uint32_t active = spec.n - std::min(spec.silent_nodes, spec.n);
    const std::uint32_t sparse_from = active - std::min(spec.sparse_nodes, active);
    const std::uint32_t communities = std::max<std::uint32_t>(1, spec.communities);

    std::vector<MeetingEvent> events;
    for (NodeId a = 0; a < active; ++a) {
        for (NodeId b = a + 1; b < active; ++b) {
            Seconds period = a % communities == b % communities ? spec.base_period
                                                                : 4 * spec.base_period;
            if (a >= sparse_from || b >= sparse_from) period *= 6;
            if (period <= 0) period = 1;
            const auto jitter = [&] {
                return static_cast<Seconds>(rng() % static_cast<std::uint64_t>(period));
            };
            for (Seconds t = jitter(); t <= spec.duration; t += period / 2 + 1 + jitter()) {
                events.push_back({t, a, b});
            }
        }
    }
    std::sort(events.begin(), events.end());
    events.erase(std::unique(events.begin(), events.end()), events.end());
    trace.events = std::move(events);
    trace.validate();
    return trace;
}

}  // namespace capsim::testing
