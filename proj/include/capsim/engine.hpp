#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "capsim/protocol.hpp"
#include "capsim/trace.hpp"

namespace capsim {

// A single injected node capture: the victim stops communicating at
// capture_time (its later meetings are dropped, it never answers alarms).
struct CaptureScenario {
    NodeId victim = 0;
    Seconds capture_time = 0;

    friend bool operator==(const CaptureScenario&, const CaptureScenario&) = default;
};

// Dispatch rank at equal timestamps. A capture must suppress the victim's
// same-instant activity; arming (set-up end) precedes same-instant meetings;
// flood deliveries must land before answer deadlines are judged and before
// timers fire; periodic claims run last so a same-instant claim can invalidate
// a just-expired timer before its alarm is flushed.
enum class EventKind : int {
    Capture = 0,
    SetupEnd = 1,
    Meeting = 2,  // replayed from the trace in order, never queued
    FloodDelivery = 3,
    AlarmResolution = 4,
    TimerExpiry = 5,
    PeriodicClaim = 6,
};

// Message accounting. One flood costs 1 sent and 1 received for every node
// alive at emission time; a unicast costs 1 sent and 1 received. Messages
// emitted before the measurement start are not counted. Revocations are local
// decisions and cost nothing.
struct MessageLedger {
    std::vector<std::int64_t> sent;      // per node
    std::vector<std::int64_t> received;  // per node
    std::array<std::int64_t, kMessageClassCount> sent_by_class{};
    std::array<std::int64_t, kMessageClassCount> received_by_class{};

    MessageLedger() = default;
    explicit MessageLedger(std::size_t n) : sent(n, 0), received(n, 0) {}

    std::int64_t total_sent() const;
    std::int64_t total_received() const;

    bool operator==(const MessageLedger&) const = default;
};

struct AlarmLogEntry {
    Seconds time = 0;
    NodeId watcher = 0;
    NodeId subject = 0;
    bool answered = false;  // a presence claim arrived before the deadline

    bool operator==(const AlarmLogEntry&) const = default;
};

struct SimulationResult {
    std::optional<Seconds> detection_time;   // alarm_time - capture_time
    std::optional<Seconds> alarm_time;       // first alarm that led to revocation
    std::optional<Seconds> revocation_time;  // alarm_time + delta
    bool false_negative = false;             // capture injected, never revoked
    std::int64_t false_positive_count = 0;   // revocation-deadline misses by live nodes
    MessageLedger ledger;
    std::vector<AlarmLogEntry> alarm_log;

    bool operator==(const SimulationResult&) const = default;
};

// Test/diagnostic hook, called once after initialization and after every
// dispatched event (including flushed alarm emissions) with the node table.
class EngineObserver {
  public:
    virtual ~EngineObserver() = default;
    virtual void after_event(Seconds now, const std::vector<NodeState>& nodes,
                             const std::vector<bool>& alive) = 0;
};

// Replays the trace against one protocol configuration, optionally injecting
// a capture, and returns the deterministic outcome. Identical inputs yield
// bit-identical results. Nothing is scheduled past trace.duration.
SimulationResult run_simulation(const ContactTrace& trace, const ProtocolConfig& cfg,
                                const std::optional<CaptureScenario>& scenario,
                                Seconds measure_from, EngineObserver* observer = nullptr);

}  // namespace capsim
