#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace capsim {

using NodeId = std::uint32_t;
using Seconds = std::int64_t;

// One symmetric meeting instant. Stored in canonical orientation a < b;
// consumers expand it symmetrically (a meets b implies b meets a).
struct MeetingEvent {
    Seconds time = 0;
    NodeId a = 0;
    NodeId b = 0;

    friend bool operator==(const MeetingEvent&, const MeetingEvent&) = default;
    friend auto operator<=>(const MeetingEvent& l, const MeetingEvent& r) {
        // total order: time, then (a, b) — deterministic replay needs ties broken
        if (auto c = l.time <=> r.time; c != 0) return c;
        if (auto c = l.a <=> r.a; c != 0) return c;
        return l.b <=> r.b;
    }
};

struct ContactTrace {
    std::uint32_t n = 0;          // node count; IDs referenced by events are < n
    Seconds duration = 0;         // >= max event time
    std::vector<MeetingEvent> events;  // sorted by (time, a, b)

    void validate() const;  // throws TraceError on a broken invariant
    friend bool operator==(const ContactTrace&, const ContactTrace&) = default;
};

struct MeetingStats {
    std::vector<std::int64_t> counts;   // indexed by NodeId, one increment per endpoint
    std::vector<NodeId> isolated;       // counts at or below the quantile threshold
    std::int64_t threshold = 0;
};

class TraceError : public std::runtime_error {
public:
    explicit TraceError(const std::string& what) : std::runtime_error(what) {}
};

// Line-based CSV: `time,a,b`, `#` comments, optional header `n=<count>,duration=<seconds>`.
// Orientation is canonicalized to a < b and exact duplicates are collapsed.
// Without a header, n is inferred as max id + 1 and duration as the last event time.
ContactTrace parse_contact_trace(std::istream& in);
ContactTrace parse_contact_trace_file(const std::string& path);

void serialize_contact_trace(const ContactTrace& trace, std::ostream& out);
std::string serialize_contact_trace(const ContactTrace& trace);

// Keeps events with t_min <= time <= t_max (closed bounds), shifts times so the
// window start maps to 0. duration becomes t_max - t_min. Empty result is allowed.
ContactTrace filter_window(const ContactTrace& trace, Seconds t_min, Seconds t_max);

struct RemovalResult {
    ContactTrace trace;
    std::map<NodeId, NodeId> relabel;  // original id -> dense id, survivors only
};

// Drops every event touching a removed id and relabels survivors to a dense
// [0, n') range preserving ascending order of the original ids.
RemovalResult remove_nodes(const ContactTrace& trace, const std::set<NodeId>& ids);

// Concatenates k copies; copy i is shifted by i * duration.
ContactTrace repeat_trace(const ContactTrace& trace, std::uint32_t k);

MeetingStats meeting_counts(const ContactTrace& trace, double isolated_quantile = 0.1);

}  // namespace capsim
