#include "capsim/protocol.hpp"

#include <algorithm>
#include <cassert>
#include <numeric>

namespace capsim {

namespace {

Seconds timeout_of(const ProtocolConfig& cfg) {
    return cfg.kind == ProtocolKind::Benchmark ? cfg.tau + cfg.sigma : cfg.lambda;
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

ProtocolKind protocol_kind_from_string(const std::string& name) {
    std::string s = lower(name);
    if (s == "benchmark") return ProtocolKind::Benchmark;
    if (s == "base") return ProtocolKind::Base;
    if (s == "booking") return ProtocolKind::Booking;
    if (s == "adaptive") return ProtocolKind::Adaptive;
    if (s == "adabo") return ProtocolKind::AdaBo;
    throw ConfigError("unknown protocol '" + name + "'");
}

std::string to_string(ProtocolKind kind) {
    switch (kind) {
        case ProtocolKind::Benchmark: return "benchmark";
        case ProtocolKind::Base: return "base";
        case ProtocolKind::Booking: return "booking";
        case ProtocolKind::Adaptive: return "adaptive";
        case ProtocolKind::AdaBo: return "adabo";
    }
    return "?";
}

std::vector<NodeId> successor_assignment(std::uint32_t n) {
    std::vector<NodeId> a(n);
    for (NodeId i = 0; i < n; ++i) a[i] = (i + 1) % n;
    return a;
}

std::vector<NodeId> ProtocolConfig::assignment_for(std::uint32_t n) const {
    if (booking_assignment.empty()) return successor_assignment(n);
    if (booking_assignment.size() != n) {
        throw ConfigError("booking_assignment has " + std::to_string(booking_assignment.size()) +
                          " entries for " + std::to_string(n) + " nodes");
    }
    return booking_assignment;
}

void ProtocolConfig::validate(std::uint32_t n) const {
    if (lambda <= 0) throw ConfigError("lambda must be positive");
    if (delta < 0) throw ConfigError("delta must be non-negative");
    if (sigma < 0) throw ConfigError("sigma must be non-negative");
    if (sigma > delta) throw ConfigError("sigma must not exceed delta (live nodes must answer in time)");
    if (gamma < 0) throw ConfigError("gamma must be non-negative");
    if (gamma >= lambda) throw ConfigError("gamma must be smaller than lambda");
    if (setup_duration < 0) throw ConfigError("setup_duration must be non-negative");
    if (sms_refresh_interval < 0) throw ConfigError("sms_refresh_interval must be non-negative");
    if (kind == ProtocolKind::Benchmark && tau <= 0) throw ConfigError("tau must be positive");
    if ((kind == ProtocolKind::Base || kind == ProtocolKind::Adaptive) && k_tracked < 1) {
        throw ConfigError("k_tracked must be at least 1");
    }
    bool needs_assignment = kind == ProtocolKind::Booking ||
                            (kind == ProtocolKind::AdaBo && adabo_admin_slot);
    if (needs_assignment) {
        if (n < 2) throw ConfigError("assignment needs at least 2 nodes");
        auto a = assignment_for(n);
        std::vector<bool> hit(n, false);
        for (NodeId w = 0; w < n; ++w) {
            if (a[w] >= n) throw ConfigError("assignment references id " + std::to_string(a[w]));
            if (a[w] == w) throw ConfigError("assignment maps node " + std::to_string(w) + " to itself");
            if (hit[a[w]]) throw ConfigError("assignment is not a permutation");
            hit[a[w]] = true;
        }
    }
}

void apply_protocol_keys(ProtocolConfig& cfg, const std::map<std::string, std::string>& kv) {
    if (kv.count("protocol")) cfg.kind = protocol_kind_from_string(kv.at("protocol"));
    cfg.tau = config_int(kv, "tau", cfg.tau);
    cfg.lambda = config_int(kv, "lambda", cfg.lambda);
    cfg.delta = config_int(kv, "delta", cfg.delta);
    cfg.gamma = config_int(kv, "gamma", cfg.gamma);
    cfg.sigma = config_int(kv, "sigma", cfg.sigma);
    cfg.k_tracked = static_cast<std::uint32_t>(config_int(kv, "k_tracked", cfg.k_tracked));
    cfg.sms_capacity = static_cast<std::uint32_t>(config_int(kv, "sms_capacity", cfg.sms_capacity));
    cfg.sms_refresh_interval = config_int(kv, "sms_refresh_interval", cfg.sms_refresh_interval);
    cfg.setup_duration = config_int(kv, "setup_duration", cfg.setup_duration);
    cfg.max_exchanges = static_cast<std::uint32_t>(config_int(kv, "max_exchanges", cfg.max_exchanges));
    cfg.base_cooperation = config_bool(kv, "base_cooperation", cfg.base_cooperation);
    cfg.strict_cap = config_bool(kv, "strict_cap", cfg.strict_cap);
    cfg.flip_exchange_rule = config_bool(kv, "flip_exchange_rule", cfg.flip_exchange_rule);
    cfg.adabo_admin_slot = config_bool(kv, "adabo_admin_slot", cfg.adabo_admin_slot);
    cfg.benchmark_aligned = config_bool(kv, "benchmark_aligned", cfg.benchmark_aligned);
    if (kv.count("booking_assignment")) {
        const std::string& v = kv.at("booking_assignment");
        cfg.booking_assignment.clear();
        if (lower(v) != "successor") {
            for (const auto& item : split_list(v)) {
                std::int64_t id = std::stoll(item);
                if (id < 0) throw ConfigError("booking_assignment: negative id");
                cfg.booking_assignment.push_back(static_cast<NodeId>(id));
            }
        }
    }
}

TrackedSlot* NodeState::find_slot(NodeId subject) {
    for (auto& s : tracked) {
        if (s.subject == subject) return &s;
    }
    return nullptr;
}

const TrackedSlot* NodeState::find_slot(NodeId subject) const {
    return const_cast<NodeState*>(this)->find_slot(subject);
}

SmsEntry* NodeState::find_sms(NodeId subject) {
    for (auto& e : sms) {
        if (e.subject == subject) return &e;
    }
    return nullptr;
}

const SmsEntry* NodeState::find_sms(NodeId subject) const {
    return const_cast<NodeState*>(this)->find_sms(subject);
}

bool NodeState::erase_slot(NodeId subject) {
    auto before = tracked.size();
    std::erase_if(tracked, [&](const TrackedSlot& s) { return s.subject == subject; });
    return tracked.size() != before;
}

bool NodeState::erase_sms(NodeId subject) {
    auto before = sms.size();
    std::erase_if(sms, [&](const SmsEntry& e) { return e.subject == subject; });
    return sms.size() != before;
}

NodeState make_node_state(NodeId self, std::uint32_t n, const ProtocolConfig& cfg) {
    NodeState st;
    st.self = self;
    st.last_met.assign(n, -1);
    st.raised_alarm.assign(n, false);
    switch (cfg.kind) {
        case ProtocolKind::Benchmark:
            for (NodeId v = 0; v < n; ++v) {
                if (v != self) st.tracked.push_back({v, 0, cfg.tau + cfg.sigma, false});
            }
            st.armed = true;
            break;
        case ProtocolKind::Base:
        case ProtocolKind::Adaptive:
            st.armed = true;
            break;
        case ProtocolKind::Booking:
            st.tracked.push_back({cfg.assignment_for(n)[self], 0, cfg.lambda, false});
            st.armed = true;
            break;
        case ProtocolKind::AdaBo:
            st.has_token = true;
            st.token = self;
            st.armed = false;  // slots arm when the set-up window closes
            break;
    }
    return st;
}

int compare_scores(std::int64_t c1, Seconds e1, std::int64_t c2, Seconds e2) {
    // elapsed 0: rate 0 for count 0, +infinity otherwise
    int cls1 = e1 > 0 ? 1 : (c1 > 0 ? 2 : 0);
    int cls2 = e2 > 0 ? 1 : (c2 > 0 ? 2 : 0);
    if (cls1 == 0) c1 = 0, e1 = 1, cls1 = 1;
    if (cls2 == 0) c2 = 0, e2 = 1, cls2 = 1;
    if (cls1 != cls2) return cls1 < cls2 ? -1 : 1;
    if (cls1 == 2) return 0;  // both infinite
    __int128 lhs = static_cast<__int128>(c1) * e2;
    __int128 rhs = static_cast<__int128>(c2) * e1;
    if (lhs < rhs) return -1;
    if (lhs > rhs) return 1;
    return 0;
}

ScoreRef sms_score(const NodeState& s, NodeId subject, Seconds now) {
    const SmsEntry* e = s.find_sms(subject);
    if (!e) return {};
    return {true, e->meeting_count, now - e->window_start};
}

int compare_score_refs(const ScoreRef& a, const ScoreRef& b) {
    if (!a.present || !b.present) {
        if (a.present == b.present) return 0;
        return a.present ? 1 : -1;  // absent ranks as -infinity
    }
    return compare_scores(a.count, a.elapsed, b.count, b.elapsed);
}

namespace {

// Updates a slot to evidence observed at `seen` (which may predate `now` when
// it was relayed by a peer). A timer is armed only for future deadlines: a
// slot whose adopted evidence is already older than the time-out stays silent
// until fresher evidence arrives — its own alarm is already in flight.
void refresh_slot(NodeState& s, TrackedSlot& slot, Seconds seen, Seconds now,
                  const ProtocolConfig& cfg, ActionList& out) {
    slot.last_seen = seen;
    slot.deadline = seen + timeout_of(cfg);
    if (slot.deadline >= now) out.push_back(StartTimer{s.self, slot.subject, slot.deadline});
}

// Evict the minimum-score entry (ties: lower subject id). SMS must be non-empty.
void evict_min_score(NodeState& s, Seconds now) {
    std::size_t min_i = 0;
    for (std::size_t i = 1; i < s.sms.size(); ++i) {
        ScoreRef a{true, s.sms[i].meeting_count, now - s.sms[i].window_start};
        ScoreRef b{true, s.sms[min_i].meeting_count, now - s.sms[min_i].window_start};
        int c = compare_score_refs(a, b);
        if (c < 0 || (c == 0 && s.sms[i].subject < s.sms[min_i].subject)) min_i = i;
    }
    s.sms.erase(s.sms.begin() + static_cast<std::ptrdiff_t>(min_i));
}

// Shared SMS bookkeeping for Adaptive and AdaBo: count a meeting with `peer`,
// admitting it when there is room or when a refresh boundary has passed.
void sms_touch(NodeState& s, NodeId peer, Seconds now, const ProtocolConfig& cfg) {
    if (cfg.sms_capacity == 0) return;
    if (SmsEntry* e = s.find_sms(peer)) {
        ++e->meeting_count;
        return;
    }
    if (s.sms.size() < cfg.sms_capacity) {
        s.sms.push_back({peer, 0, now});
        return;
    }
    if (cfg.sms_refresh_interval <= 0) return;
    Seconds boundary = (now / cfg.sms_refresh_interval) * cfg.sms_refresh_interval;
    if (boundary <= s.last_refresh_boundary) return;
    s.last_refresh_boundary = boundary;
    evict_min_score(s, now);
    s.sms.push_back({peer, 0, now});
}

}  // namespace

ActionList on_meeting(NodeState& s, NodeId peer, Seconds now, const ProtocolConfig& cfg) {
    ActionList out;
    s.last_met[peer] = std::max(s.last_met[peer], now);
    switch (cfg.kind) {
        case ProtocolKind::Benchmark:
            break;  // presence is witnessed through claims only
        case ProtocolKind::Base:
            if (TrackedSlot* slot = s.find_slot(peer)) {
                refresh_slot(s, *slot, now, now, cfg, out);
            } else if (s.tracked.size() < cfg.k_tracked) {
                s.tracked.push_back({peer, now, now + cfg.lambda, false});
                out.push_back(StartTimer{s.self, peer, now + cfg.lambda});
            }
            break;
        case ProtocolKind::Booking:
            if (TrackedSlot* slot = s.find_slot(peer)) refresh_slot(s, *slot, now, now, cfg, out);
            break;
        case ProtocolKind::Adaptive:
            if (TrackedSlot* slot = s.find_slot(peer)) {
                refresh_slot(s, *slot, now, now, cfg, out);
            } else if (s.tracked.size() < cfg.k_tracked) {
                s.erase_sms(peer);  // tracked and SMS stay disjoint
                s.tracked.push_back({peer, now, now + cfg.lambda, false});
                out.push_back(StartTimer{s.self, peer, now + cfg.lambda});
            } else {
                sms_touch(s, peer, now, cfg);
            }
            break;
        case ProtocolKind::AdaBo:
            for (auto& slot : s.tracked) {
                if (slot.subject == peer) refresh_slot(s, slot, now, now, cfg, out);
            }
            sms_touch(s, peer, now, cfg);  // a booked node may sit in the SMS too
            break;
    }
    return out;
}

ActionList on_timer_expiry(NodeState& s, NodeId subject, Seconds now, const ProtocolConfig& cfg) {
    (void)cfg;
    ActionList out;
    for (const auto& slot : s.tracked) {
        if (slot.subject == subject && slot.deadline == now) {
            out.push_back(RaiseAlarm{s.self, subject});
            break;  // one alarm even if a token slot and an admin slot coincide
        }
    }
    return out;
}

namespace {

// Adaptive reaction to an answered alarm it raised: stop tracking the subject
// and promote the best-scored SMS entry whose evidence is fresh enough that
// the new slot's deadline has not already passed; otherwise leave the vacancy
// for the next meeting to fill.
void adaptive_drop_and_promote(NodeState& s, NodeId subject, Seconds now, const ProtocolConfig& cfg,
                               ActionList& out) {
    s.erase_slot(subject);
    std::ptrdiff_t best = -1;
    for (std::size_t i = 0; i < s.sms.size(); ++i) {
        Seconds evidence = s.last_met[s.sms[i].subject];
        if (evidence < 0 || evidence < now - cfg.lambda) continue;
        if (best < 0) {
            best = static_cast<std::ptrdiff_t>(i);
            continue;
        }
        ScoreRef a{true, s.sms[i].meeting_count, now - s.sms[i].window_start};
        ScoreRef b{true, s.sms[static_cast<std::size_t>(best)].meeting_count,
                   now - s.sms[static_cast<std::size_t>(best)].window_start};
        int c = compare_score_refs(a, b);
        if (c > 0 || (c == 0 && s.sms[i].subject < s.sms[static_cast<std::size_t>(best)].subject)) {
            best = static_cast<std::ptrdiff_t>(i);
        }
    }
    if (best >= 0) {
        SmsEntry e = s.sms[static_cast<std::size_t>(best)];
        s.sms.erase(s.sms.begin() + best);
        Seconds seen = s.last_met[e.subject];
        s.tracked.push_back({e.subject, seen, seen + cfg.lambda, false});
        out.push_back(StartTimer{s.self, e.subject, seen + cfg.lambda});
    }
}

}  // namespace

ActionList on_flood_received(NodeState& s, FloodKind kind, NodeId subject, Seconds now,
                             const ProtocolConfig& cfg) {
    ActionList out;
    switch (kind) {
        case FloodKind::Alarm:
            if (subject == s.self) out.push_back(RaiseClaim{s.self});
            break;
        case FloodKind::PresenceClaim: {
            s.last_met[subject] = std::max(s.last_met[subject], now);
            bool raiser = s.raised_alarm[subject];
            s.raised_alarm[subject] = false;
            if (cfg.kind == ProtocolKind::Adaptive && raiser) {
                adaptive_drop_and_promote(s, subject, now, cfg, out);
            } else {
                for (auto& slot : s.tracked) {
                    if (slot.subject == subject) refresh_slot(s, slot, now, now, cfg, out);
                }
            }
            break;
        }
        case FloodKind::Revocation:
            s.erase_slot(subject);
            s.erase_sms(subject);
            s.raised_alarm[subject] = false;
            // a token referring to the revoked node stays put, inert
            break;
    }
    return out;
}

Rational benchmark_message_rate(Seconds t_u, Seconds tau, std::uint32_t n) {
    if (tau <= 0) throw ConfigError("tau must be positive");
    if (t_u < 0) throw ConfigError("t_u must be non-negative");
    Rational r{t_u * static_cast<std::int64_t>(n), tau};
    std::int64_t g = std::gcd(r.num, r.den);
    if (g > 1) {
        r.num /= g;
        r.den /= g;
    }
    return r;
}

Seconds benchmark_first_claim(NodeId i, std::uint32_t n, Seconds tau, bool aligned) {
    if (aligned || n == 0) return 0;
    return (static_cast<Seconds>(i) * tau) / static_cast<Seconds>(n);
}

namespace {

bool token_revoked(const std::vector<bool>* revoked, NodeId token) {
    return revoked && (*revoked)[token];
}

// Swap the two booking tokens and move the matching non-admin slots with
// their last_seen. A token referring to the node owning it, or to a revoked
// node, carries no slot.
void swap_tokens(NodeState& a, NodeState& b, Seconds now, const ProtocolConfig& cfg,
                 const std::vector<bool>* revoked, ActionList& out) {
    auto take_slot = [](NodeState& s, NodeId subject) -> std::optional<TrackedSlot> {
        for (std::size_t i = 0; i < s.tracked.size(); ++i) {
            if (!s.tracked[i].admin && s.tracked[i].subject == subject) {
                TrackedSlot slot = s.tracked[i];
                s.tracked.erase(s.tracked.begin() + static_cast<std::ptrdiff_t>(i));
                return slot;
            }
        }
        return std::nullopt;
    };
    NodeId tok_a = a.token;
    NodeId tok_b = b.token;
    auto slot_a = tok_a != a.self ? take_slot(a, tok_a) : std::nullopt;
    auto slot_b = tok_b != b.self ? take_slot(b, tok_b) : std::nullopt;
    a.token = tok_b;
    b.token = tok_a;
    auto install = [&](NodeState& taker, NodeId peer, NodeId tok,
                       const std::optional<TrackedSlot>& carried) {
        assert(tok != taker.self);
        if (token_revoked(revoked, tok)) return;
        Seconds seen = tok == peer ? now : (carried ? carried->last_seen : now);
        taker.tracked.push_back({tok, seen, seen + cfg.lambda, false});
        // Carried evidence can already be overdue; arming a past deadline would
        // put an event behind the clock. The overdue subject's alarm is the
        // previous holder's responsibility (its timer fired before the swap).
        if (seen + cfg.lambda >= now) out.push_back(StartTimer{taker.self, tok, seen + cfg.lambda});
    };
    install(a, b.self, tok_b, slot_b);
    install(b, a.self, tok_a, slot_a);
}

}  // namespace

std::optional<ExchangeProposal> propose_exchange(const NodeState& a, const NodeState& d, Seconds now,
                                                 const ProtocolConfig& cfg,
                                                 const std::vector<bool>* revoked) {
    if (cfg.kind != ProtocolKind::AdaBo || !a.armed || !d.armed) return std::nullopt;
    if (!a.has_token || !d.has_token) return std::nullopt;
    if (a.token == a.self || d.token == d.self) return std::nullopt;
    if (d.token == a.self || a.token == d.self) return std::nullopt;  // never re-take your own ID
    if (token_revoked(revoked, a.token) || token_revoked(revoked, d.token)) return std::nullopt;
    if (a.exchange_count >= cfg.max_exchanges) return std::nullopt;  // the cap blocks proposing
    if (compare_score_refs(sms_score(a, d.token, now), sms_score(a, a.token, now)) <= 0) {
        return std::nullopt;  // must strictly improve
    }
    return ExchangeProposal{a.self, d.self, a.token, d.token};
}

bool evaluate_exchange(const NodeState& d, NodeId offered, NodeId requested, Seconds now,
                       const ProtocolConfig& cfg) {
    bool under_cap = cfg.strict_cap ? d.exchange_count < cfg.max_exchanges
                                    : d.exchange_count <= cfg.max_exchanges;
    if (!under_cap) return false;
    ScoreRef keep = sms_score(d, requested, now);
    ScoreRef recv = sms_score(d, offered, now);
    int c = cfg.flip_exchange_rule ? compare_score_refs(recv, keep) : compare_score_refs(keep, recv);
    return c >= 0;
}

bool initial_token_pass(NodeState& a, NodeState& b, Seconds now, const ProtocolConfig& cfg,
                        const std::vector<bool>* revoked, ActionList& out) {
    if (cfg.kind != ProtocolKind::AdaBo || !a.armed || !b.armed) return false;
    if (!a.has_token || !b.has_token || a.token != a.self) return false;
    if (!a.find_sms(b.self)) return false;  // pass at the first meeting with an SMS member
    swap_tokens(a, b, now, cfg, revoked, out);
    out.push_back(Unicast{MessageClass::Exchange, a.self, b.self});
    out.push_back(Unicast{MessageClass::Exchange, b.self, a.self});
    return true;
}

ActionList base_cooperation_merge(NodeState& a, NodeState& b, Seconds now, const ProtocolConfig& cfg) {
    ActionList out;
    if (cfg.kind != ProtocolKind::Base || !cfg.base_cooperation) return out;
    bool shared = false;
    for (auto& sa : a.tracked) {
        TrackedSlot* sb = b.find_slot(sa.subject);
        if (!sb) continue;
        if (!shared) {
            shared = true;
            out.push_back(Unicast{MessageClass::Cooperation, a.self, b.self});
            out.push_back(Unicast{MessageClass::Cooperation, b.self, a.self});
        }
        Seconds m = std::max(sa.last_seen, sb->last_seen);
        if (m > sa.last_seen) refresh_slot(a, sa, m, now, cfg, out);
        if (m > sb->last_seen) refresh_slot(b, *sb, m, now, cfg, out);
    }
    return out;
}

namespace {

void adabo_admin_release(NodeState& s, const NodeState& peer) {
    if (!peer.has_token || peer.token == peer.self) return;
    std::erase_if(s.tracked,
                  [&](const TrackedSlot& slot) { return slot.admin && slot.subject == peer.self; });
}

void adabo_cooperation(NodeState& s, NodeState& peer, Seconds now, const ProtocolConfig& cfg,
                       ActionList& out) {
    for (auto& slot : s.tracked) {
        if (slot.subject == peer.self) continue;
        if (now < slot.deadline - cfg.gamma) continue;
        out.push_back(Unicast{MessageClass::Cooperation, s.self, peer.self});  // request
        Seconds evidence = peer.last_met[slot.subject];
        if (evidence > slot.last_seen) {
            out.push_back(Unicast{MessageClass::Cooperation, peer.self, s.self});  // useful reply
            refresh_slot(s, slot, evidence, now, cfg, out);
            s.last_met[slot.subject] = std::max(s.last_met[slot.subject], evidence);
        }
    }
}

}  // namespace

ActionList handle_meeting(NodeState& a, NodeState& b, Seconds now, const ProtocolConfig& cfg,
                          const std::vector<bool>* revoked) {
    assert(a.self < b.self);
    ActionList out;
    auto append = [&](ActionList&& more) {
        for (auto& act : more) out.push_back(act);
    };
    append(on_meeting(a, b.self, now, cfg));
    append(on_meeting(b, a.self, now, cfg));
    if (cfg.kind == ProtocolKind::AdaBo && a.armed && b.armed) {
        initial_token_pass(a, b, now, cfg, revoked, out);
        initial_token_pass(b, a, now, cfg, revoked, out);
        adabo_admin_release(a, b);
        adabo_admin_release(b, a);
        for (int dir = 0; dir < 2; ++dir) {
            NodeState& p = dir == 0 ? a : b;
            NodeState& q = dir == 0 ? b : a;
            auto prop = propose_exchange(p, q, now, cfg, revoked);
            if (!prop) continue;
            out.push_back(Unicast{MessageClass::Exchange, p.self, q.self});  // proposal
            out.push_back(Unicast{MessageClass::Exchange, q.self, p.self});  // answer
            if (evaluate_exchange(q, prop->offered, prop->requested, now, cfg)) {
                swap_tokens(p, q, now, cfg, revoked, out);
                ++p.exchange_count;
                ++q.exchange_count;
                // One accepted exchange settles the meeting. Re-proposing on the
                // swapped state would let the responder trade the tokens straight
                // back (its acceptance bound is the proposer's improvement bound),
                // undoing the exchange at the cost of two counter increments each.
                break;
            }
        }
        adabo_cooperation(a, b, now, cfg, out);
        adabo_cooperation(b, a, now, cfg, out);
    }
    if (cfg.kind == ProtocolKind::Base && cfg.base_cooperation) {
        append(base_cooperation_merge(a, b, now, cfg));
    }
    return out;
}

}  // namespace capsim
