#include "capsim/engine.hpp"

#include <cassert>
#include <numeric>
#include <queue>

namespace capsim {

std::int64_t MessageLedger::total_sent() const {
    return std::accumulate(sent.begin(), sent.end(), std::int64_t{0});
}

std::int64_t MessageLedger::total_received() const {
    return std::accumulate(received.begin(), received.end(), std::int64_t{0});
}

namespace {

struct QueuedEvent {
    Seconds time = 0;
    EventKind kind = EventKind::Capture;
    std::uint64_t seq = 0;
    NodeId a = 0;  // victim / flood subject / timer owner / claim owner
    NodeId b = 0;  // flood origin / timer subject
    FloodKind flood = FloodKind::Alarm;
    Seconds deadline = 0;     // armed deadline (TimerExpiry)
    std::size_t record = 0;   // alarm record (FloodDelivery of alarms, AlarmResolution)
};

struct LaterEvent {
    bool operator()(const QueuedEvent& x, const QueuedEvent& y) const {
        if (x.time != y.time) return x.time > y.time;
        if (x.kind != y.kind) return static_cast<int>(x.kind) > static_cast<int>(y.kind);
        return x.seq > y.seq;
    }
};

struct AlarmRecord {
    Seconds raised_at = 0;
    NodeId watcher = 0;
    NodeId subject = 0;
    bool answered = false;
    bool delivered = false;
    std::size_t log_index = 0;
};

// An alarm whose timer genuinely expired at `deadline`, withheld until every
// other event of that instant has run. A same-instant claim or meeting then
// re-arms the slot and the entry is discarded on re-validation, so the
// outcome does not depend on dispatch order within the instant.
struct PendingAlarm {
    NodeId watcher = 0;
    NodeId subject = 0;
    Seconds deadline = 0;
};

class Engine {
  public:
    Engine(const ContactTrace& trace, ProtocolConfig cfg,
           const std::optional<CaptureScenario>& scenario, Seconds measure_from,
           EngineObserver* observer)
        : trace_(trace),
          cfg_(std::move(cfg)),
          scenario_(scenario),
          measure_from_(measure_from),
          observer_(observer) {}

    SimulationResult run() {
        init();
        notify(0);
        while (step()) {
        }
        result_.false_negative = scenario_.has_value() && !result_.revocation_time.has_value();
        return std::move(result_);
    }

  private:
    void init() {
        trace_.validate();
        cfg_.validate(trace_.n);
        if (scenario_) {
            if (scenario_->victim >= trace_.n) {
                throw ConfigError("capture victim " + std::to_string(scenario_->victim) +
                                  " out of range for " + std::to_string(trace_.n) + " nodes");
            }
            if (scenario_->capture_time < 0 || scenario_->capture_time > trace_.duration) {
                throw ConfigError("capture time outside the trace");
            }
        }
        n_ = trace_.n;
        alive_.assign(n_, true);
        revoked_.assign(n_, false);
        last_claim_emit_.assign(n_, -1);
        result_ = SimulationResult{};
        result_.ledger = MessageLedger(n_);
        nodes_.clear();
        nodes_.reserve(n_);
        for (NodeId i = 0; i < n_; ++i) nodes_.push_back(make_node_state(i, n_, cfg_));
        for (const auto& s : nodes_) {
            for (const auto& slot : s.tracked) schedule_timer(s.self, slot.subject, slot.deadline);
        }
        if (cfg_.kind == ProtocolKind::Benchmark) {
            for (NodeId i = 0; i < n_; ++i) {
                Seconds first = benchmark_first_claim(i, n_, cfg_.tau, cfg_.benchmark_aligned);
                if (first <= trace_.duration) {
                    schedule({first, EventKind::PeriodicClaim, 0, i});
                }
            }
        }
        if (cfg_.kind == ProtocolKind::AdaBo && cfg_.setup_duration <= trace_.duration) {
            schedule({cfg_.setup_duration, EventKind::SetupEnd, 0});
        }
        if (scenario_) {
            schedule({scenario_->capture_time, EventKind::Capture, 0, scenario_->victim});
        }
    }

    // Dispatches the earliest event (queue merged with the meeting cursor) or
    // flushes one withheld alarm once the current instant is fully drained.
    bool step() {
        bool have_q = !queue_.empty();
        bool have_m = meeting_idx_ < trace_.events.size();
        if (!pending_.empty()) {
            Seconds t = pending_.front().deadline;
            bool queue_clear = !have_q || queue_.top().time > t;
            bool meetings_clear = !have_m || trace_.events[meeting_idx_].time > t;
            if (queue_clear && meetings_clear) {
                flush_one_pending(t);
                notify(t);
                return true;
            }
        }
        if (!have_q && !have_m) return false;
        bool take_meeting =
            have_m &&
            (!have_q || trace_.events[meeting_idx_].time < queue_.top().time ||
             (trace_.events[meeting_idx_].time == queue_.top().time &&
              EventKind::Meeting < queue_.top().kind));
        if (take_meeting) {
            const MeetingEvent& m = trace_.events[meeting_idx_++];
            if (alive_[m.a] && alive_[m.b]) {
                apply_actions(handle_meeting(nodes_[m.a], nodes_[m.b], m.time, cfg_, &revoked_),
                              m.time);
            }
            notify(m.time);
            return true;
        }
        QueuedEvent ev = queue_.top();
        queue_.pop();
        switch (ev.kind) {
            case EventKind::Capture:
                alive_[ev.a] = false;
                break;
            case EventKind::SetupEnd:
                handle_setup_end(ev.time);
                break;
            case EventKind::FloodDelivery:
                handle_flood_delivery(ev);
                break;
            case EventKind::AlarmResolution:
                handle_resolution(ev);
                break;
            case EventKind::TimerExpiry:
                if (alive_[ev.a] && !revoked_[ev.b]) {
                    apply_actions(on_timer_expiry(nodes_[ev.a], ev.b, ev.time, cfg_), ev.time);
                }
                break;
            case EventKind::PeriodicClaim:
                if (alive_[ev.a]) {
                    emit_claim(ev.a, ev.time);
                    if (ev.time + cfg_.tau <= trace_.duration) {
                        schedule({ev.time + cfg_.tau, EventKind::PeriodicClaim, 0, ev.a});
                    }
                }
                break;
            case EventKind::Meeting:
                assert(false);  // meetings come from the cursor
                break;
        }
        notify(ev.time);
        return true;
    }

    void handle_setup_end(Seconds now) {
        for (auto& s : nodes_) s.armed = true;
        if (!cfg_.adabo_admin_slot) return;
        auto assign = cfg_.assignment_for(n_);
        for (NodeId w = 0; w < n_; ++w) {
            if (!alive_[w]) continue;
            NodeId subject = assign[w];
            if (revoked_[subject]) continue;
            nodes_[w].tracked.push_back({subject, now, now + cfg_.lambda, true});
            schedule_timer(w, subject, now + cfg_.lambda);
        }
    }

    void handle_flood_delivery(const QueuedEvent& ev) {
        if (ev.flood == FloodKind::Alarm) records_[ev.record].delivered = true;
        for (NodeId i = 0; i < n_; ++i) {
            if (!alive_[i]) continue;
            apply_actions(on_flood_received(nodes_[i], ev.flood, ev.a, ev.time, cfg_), ev.time);
        }
    }

    void handle_resolution(const QueuedEvent& ev) {
        const AlarmRecord& r = records_[ev.record];
        if (r.answered) return;           // a presence claim arrived in time
        if (revoked_[r.subject]) return;  // an earlier alarm already revoked it
        if (alive_[r.subject]) {
            // Structurally unreachable while sigma <= delta: a live subject's
            // claim always lands within the answer window. Counted, not hidden.
            ++result_.false_positive_count;
            return;
        }
        revoked_[r.subject] = true;
        if (scenario_ && r.subject == scenario_->victim && !result_.revocation_time) {
            result_.alarm_time = r.raised_at;
            result_.detection_time = r.raised_at - scenario_->capture_time;
            result_.revocation_time = ev.time;
        }
        // Every alive node reaches the same verdict from the flooded alarm and
        // the silent answer window, so the revocation costs no messages.
        for (NodeId i = 0; i < n_; ++i) {
            if (!alive_[i]) continue;
            apply_actions(on_flood_received(nodes_[i], FloodKind::Revocation, r.subject, ev.time, cfg_),
                          ev.time);
        }
    }

    void flush_one_pending(Seconds now) {
        // Canonical flush order: lowest (watcher, subject) first. Within one
        // instant the first emission can suppress the rest (and for Adaptive
        // decides which watcher reacts to the answer), so the winner must not
        // depend on internal timer-scheduling order.
        auto it = pending_.begin();
        for (auto cand = pending_.begin(); cand != pending_.end(); ++cand) {
            if (cand->watcher < it->watcher ||
                (cand->watcher == it->watcher && cand->subject < it->subject)) {
                it = cand;
            }
        }
        PendingAlarm p = *it;
        pending_.erase(it);
        if (!alive_[p.watcher] || revoked_[p.subject]) return;
        NodeState& w = nodes_[p.watcher];
        if (w.raised_alarm[p.subject]) return;  // own earlier alarm still open
        bool still_due = false;
        for (const auto& slot : w.tracked) {
            if (slot.subject == p.subject && slot.deadline == p.deadline) {
                still_due = true;
                break;
            }
        }
        if (!still_due) return;  // re-armed by a same-instant claim or meeting
        for (const auto& r : records_) {
            if (r.subject == p.subject && r.delivered && !r.answered) return;  // dedup
        }
        emit_alarm(p.watcher, p.subject, now);
    }

    void emit_alarm(NodeId watcher, NodeId subject, Seconds now) {
        nodes_[watcher].raised_alarm[subject] = true;
        std::size_t log_index = result_.alarm_log.size();
        result_.alarm_log.push_back({now, watcher, subject, false});
        records_.push_back({now, watcher, subject, false, false, log_index});
        std::size_t rec = records_.size() - 1;
        count_flood(MessageClass::Alarm, now);
        if (now + cfg_.sigma <= trace_.duration) {
            schedule({now + cfg_.sigma, EventKind::FloodDelivery, 0, subject, watcher,
                      FloodKind::Alarm, 0, rec});
        }
        if (now + cfg_.delta <= trace_.duration) {
            schedule({now + cfg_.delta, EventKind::AlarmResolution, 0, subject, watcher,
                      FloodKind::Alarm, 0, rec});
        }
    }

    void emit_claim(NodeId owner, Seconds now) {
        if (last_claim_emit_[owner] == now) return;  // one claim answers everything
        last_claim_emit_[owner] = now;
        for (auto& r : records_) {
            if (r.subject == owner && !r.answered && r.raised_at <= now) {
                r.answered = true;
                result_.alarm_log[r.log_index].answered = true;
            }
        }
        count_flood(MessageClass::Claim, now);
        if (now + cfg_.sigma <= trace_.duration) {
            schedule({now + cfg_.sigma, EventKind::FloodDelivery, 0, owner, owner,
                      FloodKind::PresenceClaim});
        }
    }

    void apply_actions(ActionList&& actions, Seconds now) {
        for (const auto& act : actions) {
            if (const auto* t = std::get_if<StartTimer>(&act)) {
                schedule_timer(t->owner, t->subject, t->deadline);
            } else if (const auto* u = std::get_if<Unicast>(&act)) {
                count_unicast(*u, now);
            } else if (const auto* c = std::get_if<RaiseClaim>(&act)) {
                emit_claim(c->owner, now);
            } else if (const auto* r = std::get_if<RaiseAlarm>(&act)) {
                pending_.push_back({r->watcher, r->subject, now});
            }
        }
    }

    void count_flood(MessageClass cls, Seconds now) {
        if (now < measure_from_) return;
        std::int64_t alive_count = 0;
        for (NodeId i = 0; i < n_; ++i) {
            if (!alive_[i]) continue;
            ++alive_count;
            ++result_.ledger.sent[i];
            ++result_.ledger.received[i];
        }
        result_.ledger.sent_by_class[static_cast<int>(cls)] += alive_count;
        result_.ledger.received_by_class[static_cast<int>(cls)] += alive_count;
    }

    void count_unicast(const Unicast& u, Seconds now) {
        if (now < measure_from_) return;
        ++result_.ledger.sent[u.from];
        ++result_.ledger.received[u.to];
        ++result_.ledger.sent_by_class[static_cast<int>(u.cls)];
        ++result_.ledger.received_by_class[static_cast<int>(u.cls)];
    }

    void schedule_timer(NodeId owner, NodeId subject, Seconds deadline) {
        if (deadline > trace_.duration) return;
        schedule({deadline, EventKind::TimerExpiry, 0, owner, subject, FloodKind::Alarm, deadline});
    }

    void schedule(QueuedEvent ev) {
        ev.seq = next_seq_++;
        queue_.push(ev);
    }

    void notify(Seconds now) {
        if (observer_) observer_->after_event(now, nodes_, alive_);
    }

    const ContactTrace& trace_;
    ProtocolConfig cfg_;
    std::optional<CaptureScenario> scenario_;
    Seconds measure_from_;
    EngineObserver* observer_;

    std::uint32_t n_ = 0;
    std::vector<NodeState> nodes_;
    std::vector<bool> alive_;
    std::vector<bool> revoked_;
    std::vector<Seconds> last_claim_emit_;
    std::priority_queue<QueuedEvent, std::vector<QueuedEvent>, LaterEvent> queue_;
    std::uint64_t next_seq_ = 0;
    std::size_t meeting_idx_ = 0;
    std::vector<AlarmRecord> records_;
    std::vector<PendingAlarm> pending_;
    SimulationResult result_;
};

}  // namespace

SimulationResult run_simulation(const ContactTrace& trace, const ProtocolConfig& cfg,
                                const std::optional<CaptureScenario>& scenario,
                                Seconds measure_from, EngineObserver* observer) {
    Engine engine(trace, cfg, scenario, measure_from, observer);
    return engine.run();
}

}  // namespace capsim
