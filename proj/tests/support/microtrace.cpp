#include "support/microtrace.hpp"

#include <algorithm>
#include <array>
#include <random>

namespace capsim::testing {

MicroCase make_micro_case(std::uint64_t seed, ProtocolKind kind) {
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(kind));
    auto pick = [&](std::int64_t lo, std::int64_t hi) {  // inclusive bounds
        return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
    };

    MicroCase mc;
    const auto n = static_cast<std::uint32_t>(pick(2, 5));
    const Seconds span = pick(200, 2000);
    mc.trace.n = n;
    mc.trace.duration = span + pick(0, 200);
    const auto meetings = static_cast<int>(pick(1, 30));
    std::vector<MeetingEvent> events;
    events.reserve(static_cast<std::size_t>(meetings));
    for (int e = 0; e < meetings; ++e) {
        const Seconds t = pick(0, span);
        auto a = static_cast<NodeId>(pick(0, n - 1));
        auto b = static_cast<NodeId>(pick(0, n - 2));
        if (b >= a) ++b;
        events.push_back({t, std::min(a, b), std::max(a, b)});
    }
    std::sort(events.begin(), events.end());
    events.erase(std::unique(events.begin(), events.end()), events.end());
    mc.trace.events = std::move(events);

    ProtocolConfig& cfg = mc.cfg;
    cfg.kind = kind;
    cfg.lambda = pick(40, 440);
    cfg.delta = std::array<Seconds, 3>{0, 5, 60}[rng() % 3];
    cfg.sigma = rng() % 2 == 0 ? 0 : 2;
    if (cfg.sigma > cfg.delta) cfg.sigma = 0;
    cfg.gamma = std::max<Seconds>(1, cfg.lambda / 4);
    cfg.tau = cfg.lambda;
    cfg.k_tracked = static_cast<std::uint32_t>(pick(1, 2));
    cfg.sms_capacity = std::array<std::uint32_t, 3>{0, 2, 3}[rng() % 3];
    cfg.sms_refresh_interval = pick(50, 350);
    cfg.setup_duration = 0;
    cfg.max_exchanges = 3;
    cfg.base_cooperation = kind == ProtocolKind::Base && rng() % 2 == 0;
    if (n >= 3 && rng() % 2 == 0) {
        // a rotation by 1..n-1 is always a fixed-point-free permutation
        const auto shift = static_cast<NodeId>(pick(1, n - 1));
        cfg.booking_assignment.resize(n);
        for (NodeId i = 0; i < n; ++i) cfg.booking_assignment[i] = (i + shift) % n;
    }

    if (rng() % 5 != 0) {
        mc.scenario =
            CaptureScenario{static_cast<NodeId>(pick(0, n - 1)), pick(0, mc.trace.duration)};
    }
    mc.measure_from = rng() % 3 == 0 ? pick(0, mc.trace.duration) : 0;
    return mc;
}

}  // namespace capsim::testing
