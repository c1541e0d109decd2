#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "capsim/config.hpp"
#include "capsim/trace.hpp"

namespace capsim {

enum class ProtocolKind { Benchmark, Base, Booking, Adaptive, AdaBo };

ProtocolKind protocol_kind_from_string(const std::string& name);
std::string to_string(ProtocolKind kind);

// Runtime parameters shared by all five protocols. Time symbols: tau = claim
// period (Benchmark), lambda = alarm time-out, delta = presence-proof window,
// gamma = cooperation window (AdaBo), sigma = flood propagation delay.
struct ProtocolConfig {
    ProtocolKind kind = ProtocolKind::Base;
    Seconds tau = 12000;
    Seconds lambda = 12600;
    Seconds delta = 60;
    Seconds gamma = 3600;
    Seconds sigma = 0;
    std::uint32_t k_tracked = 1;
    std::uint32_t sms_capacity = 5;
    Seconds sms_refresh_interval = 21600;
    Seconds setup_duration = 42000;
    std::uint32_t max_exchanges = 3;
    bool base_cooperation = false;
    // When true a node at the exchange cap may not even accept proposals
    // (default: the cap blocks proposing only).
    bool strict_cap = false;
    // Acceptance rule is score(given_away) >= score(received); this flag flips
    // it to score(received) >= score(given_away) for sensitivity runs.
    bool flip_exchange_rule = false;
    // AdaBo: administrator assigns one extra watcher per node that covers the
    // window where a node still holds the token that refers to itself.
    bool adabo_admin_slot = true;
    // Benchmark claim schedule: staggered (node i starts at i*tau/n) unless
    // aligned mode is requested (all claims at multiples of tau).
    bool benchmark_aligned = false;
    // Watcher -> subject map for Booking slots and AdaBo admin slots. Empty
    // means "successor": i -> (i+1) mod n, materialized at validation time.
    std::vector<NodeId> booking_assignment;

    void validate(std::uint32_t n) const;  // throws ConfigError
    // Returns the assignment to use for n nodes (explicit map or successor).
    std::vector<NodeId> assignment_for(std::uint32_t n) const;
};

std::vector<NodeId> successor_assignment(std::uint32_t n);

// Applies recognized keys from a parsed key=value map onto cfg.
// Unknown keys are left for the caller (campaign specs share the file).
void apply_protocol_keys(ProtocolConfig& cfg, const std::map<std::string, std::string>& kv);

enum class MessageClass : int { Alarm = 0, Claim = 1, Exchange = 2, Cooperation = 3 };
constexpr int kMessageClassCount = 4;

enum class FloodKind { Alarm, PresenceClaim, Revocation };

// --- Actions the state machines emit for the engine to execute -------------

struct StartTimer {
    NodeId owner;
    NodeId subject;
    Seconds deadline;
};
struct RaiseAlarm {
    NodeId watcher;
    NodeId subject;
};
struct RaiseClaim {
    NodeId owner;
};
// Point-to-point message exchanged during a contact; accounting only, the
// state change has already been applied to the two node states.
struct Unicast {
    MessageClass cls;
    NodeId from;
    NodeId to;
};
using ProtocolAction = std::variant<StartTimer, RaiseAlarm, RaiseClaim, Unicast>;
using ActionList = std::vector<ProtocolAction>;

// --- Per-node protocol state ------------------------------------------------

struct TrackedSlot {
    NodeId subject = 0;
    Seconds last_seen = 0;              // always a real observation instant
    Seconds deadline = 0;               // = last_seen + time-out, invariantly
    bool admin = false;                 // AdaBo administrator-assigned slot
};

struct SmsEntry {
    NodeId subject = 0;
    std::int64_t meeting_count = 0;
    Seconds window_start = 0;           // admission time; score = count/elapsed
};

struct NodeState {
    NodeId self = 0;
    std::vector<TrackedSlot> tracked;
    std::vector<SmsEntry> sms;
    bool has_token = false;             // AdaBo booking token present
    NodeId token = 0;                   // ID this node is responsible for
    std::uint32_t exchange_count = 0;
    std::vector<Seconds> last_met;      // per-node evidence, -1 = never
    std::vector<bool> raised_alarm;     // subjects this node alarmed on
    Seconds last_refresh_boundary = 0;  // SMS lazy-refresh bookkeeping
    bool armed = false;                 // AdaBo: set-up phase over

    TrackedSlot* find_slot(NodeId subject);
    const TrackedSlot* find_slot(NodeId subject) const;
    SmsEntry* find_sms(NodeId subject);
    const SmsEntry* find_sms(NodeId subject) const;
    bool erase_slot(NodeId subject);
    bool erase_sms(NodeId subject);
};

// Initial state at t = 0. Benchmark arms one slot per other node (time-out
// tau+sigma); Booking arms the assigned subject with last_seen 0; AdaBo holds
// its own token and arms nothing until set-up ends.
NodeState make_node_state(NodeId self, std::uint32_t n, const ProtocolConfig& cfg);

// Exact comparison of meeting-rate scores c1/e1 vs c2/e2 (elapsed >= 0;
// elapsed 0 counts as rate 0 unless count > 0, which compares as +infinity).
// Returns -1, 0, or 1.
int compare_scores(std::int64_t c1, Seconds e1, std::int64_t c2, Seconds e2);

// Score of `subject` in s's SMS at time `now`; absent subjects rank below
// every present one (-infinity). Encoded as (present, count, elapsed).
struct ScoreRef {
    bool present = false;
    std::int64_t count = 0;
    Seconds elapsed = 0;
};
ScoreRef sms_score(const NodeState& s, NodeId subject, Seconds now);
int compare_score_refs(const ScoreRef& a, const ScoreRef& b);

// --- Spec operations ---------------------------------------------------------

// One node's reaction to seeing `peer` now: slot refresh/admission, SMS
// bookkeeping. Pairwise choreography (token passes, exchanges, cooperation)
// lives in handle_meeting.
ActionList on_meeting(NodeState& s, NodeId peer, Seconds now, const ProtocolConfig& cfg);

// Genuine expiry (a slot for `subject` has deadline == now) emits RaiseAlarm;
// stale expiries return an empty list.
ActionList on_timer_expiry(NodeState& s, NodeId subject, Seconds now, const ProtocolConfig& cfg);

// Flood receipt: alarm about self -> RaiseClaim; presence claim -> refresh
// trackers (Adaptive: raiser drops the subject and promotes from SMS);
// revocation -> purge the subject from all structures (token kept inert).
ActionList on_flood_received(NodeState& s, FloodKind kind, NodeId subject, Seconds now,
                             const ProtocolConfig& cfg);

// Claims handled per node per period: m(t_u) = (t_u / tau) * n, reduced.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};
Rational benchmark_message_rate(Seconds t_u, Seconds tau, std::uint32_t n);

// First claim instant for node i (staggered i*tau/n or aligned 0).
Seconds benchmark_first_claim(NodeId i, std::uint32_t n, Seconds tau, bool aligned);

struct ExchangeProposal {
    NodeId proposer = 0;
    NodeId responder = 0;
    NodeId offered = 0;    // token the proposer holds
    NodeId requested = 0;  // token the responder holds
};

// a proposes to d iff a is under the proposing cap, both tokens are foreign
// and live, no side would end up holding its own ID, and a strictly improves:
// score_a(d.token) > score_a(a.token).
std::optional<ExchangeProposal> propose_exchange(const NodeState& a, const NodeState& d, Seconds now,
                                                 const ProtocolConfig& cfg,
                                                 const std::vector<bool>* revoked);

// d accepts iff under the accepting cap and score_d(requested) >=
// score_d(offered) (flip_exchange_rule swaps the operands).
bool evaluate_exchange(const NodeState& d, NodeId offered, NodeId requested, Seconds now,
                       const ProtocolConfig& cfg);

// If a still holds its own token and b is in a's SMS, swap the two tokens
// (exchange counters untouched). Returns true when the pass happened; slot
// transfers are appended to out as StartTimer actions.
bool initial_token_pass(NodeState& a, NodeState& b, Seconds now, const ProtocolConfig& cfg,
                        const std::vector<bool>* revoked, ActionList& out);

// Optional Base feature: merge last_seen for subjects tracked by both sides
// (element-wise max), costing one unicast each way when any subject is shared.
ActionList base_cooperation_merge(NodeState& a, NodeState& b, Seconds now, const ProtocolConfig& cfg);

// Full two-sided contact choreography: evidence update, per-side on_meeting,
// AdaBo passes/exchanges/cooperation, optional Base cooperation.
ActionList handle_meeting(NodeState& a, NodeState& b, Seconds now, const ProtocolConfig& cfg,
                          const std::vector<bool>* revoked);

}  // namespace capsim
