#include "capsim/trace.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace capsim {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::int64_t parse_int(std::string_view field, std::size_t line_no, const char* what) {
    field = trim(field);
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw TraceError("line " + std::to_string(line_no) + ": malformed " + what + " '" + std::string(field) + "'");
    }
    return value;
}

// header form: n=<count>,duration=<seconds>
bool try_parse_header(std::string_view line, std::size_t line_no, ContactTrace& out) {
    if (!line.starts_with("n=")) return false;
    auto comma = line.find(',');
    if (comma == std::string_view::npos) throw TraceError("line " + std::to_string(line_no) + ": malformed header");
    auto n_field = line.substr(2, comma - 2);
    auto rest = trim(line.substr(comma + 1));
    if (!rest.starts_with("duration=")) throw TraceError("line " + std::to_string(line_no) + ": malformed header");
    std::int64_t n = parse_int(n_field, line_no, "n");
    std::int64_t duration = parse_int(rest.substr(9), line_no, "duration");
    if (n < 0 || duration < 0) throw TraceError("line " + std::to_string(line_no) + ": negative header field");
    out.n = static_cast<std::uint32_t>(n);
    out.duration = duration;
    return true;
}

}  // namespace

void ContactTrace::validate() const {
    Seconds prev = 0;
    for (const auto& e : events) {
        if (e.time < prev) throw TraceError("events not sorted by time");
        prev = e.time;
        if (e.a >= e.b) throw TraceError("event not in canonical orientation (a < b)");
        if (e.b >= n) throw TraceError("event references id " + std::to_string(e.b) + " >= n");
        if (e.time > duration) throw TraceError("event time exceeds duration");
    }
}

ContactTrace parse_contact_trace(std::istream& in) {
    ContactTrace trace;
    bool have_header = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view sv = trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        if (!have_header && trace.events.empty() && try_parse_header(sv, line_no, trace)) {
            have_header = true;
            continue;
        }
        auto c1 = sv.find(',');
        auto c2 = c1 == std::string_view::npos ? c1 : sv.find(',', c1 + 1);
        if (c2 == std::string_view::npos) {
            throw TraceError("line " + std::to_string(line_no) + ": expected time,a,b");
        }
        std::int64_t t = parse_int(sv.substr(0, c1), line_no, "time");
        std::int64_t a = parse_int(sv.substr(c1 + 1, c2 - c1 - 1), line_no, "node id");
        std::int64_t b = parse_int(sv.substr(c2 + 1), line_no, "node id");
        if (t < 0) throw TraceError("line " + std::to_string(line_no) + ": negative time");
        if (a < 0 || b < 0) throw TraceError("line " + std::to_string(line_no) + ": negative node id");
        if (a == b) throw TraceError("line " + std::to_string(line_no) + ": self-meeting (a == b)");
        MeetingEvent e;
        e.time = t;
        e.a = static_cast<NodeId>(std::min(a, b));
        e.b = static_cast<NodeId>(std::max(a, b));
        trace.events.push_back(e);
    }
    if (trace.events.empty() && !have_header) throw TraceError("no events");

    std::sort(trace.events.begin(), trace.events.end());
    trace.events.erase(std::unique(trace.events.begin(), trace.events.end()), trace.events.end());

    if (!have_header) {
        NodeId max_id = 0;
        for (const auto& e : trace.events) max_id = std::max(max_id, e.b);
        trace.n = max_id + 1;
        trace.duration = trace.events.back().time;
    } else {
        for (const auto& e : trace.events) {
            if (e.b >= trace.n) throw TraceError("event references id " + std::to_string(e.b) + " >= header n");
            if (e.time > trace.duration) throw TraceError("event time exceeds header duration");
        }
    }
    return trace;
}

ContactTrace parse_contact_trace_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw TraceError("cannot open trace file: " + path);
    return parse_contact_trace(in);
}

void serialize_contact_trace(const ContactTrace& trace, std::ostream& out) {
    out << "n=" << trace.n << ",duration=" << trace.duration << "\n";
    for (const auto& e : trace.events) {
        out << e.time << ',' << e.a << ',' << e.b << '\n';
    }
}

std::string serialize_contact_trace(const ContactTrace& trace) {
    std::ostringstream os;
    serialize_contact_trace(trace, os);
    return os.str();
}

ContactTrace filter_window(const ContactTrace& trace, Seconds t_min, Seconds t_max) {
    if (t_min >= t_max) throw TraceError("filter_window: t_min must be < t_max");
    ContactTrace out;
    out.n = trace.n;
    out.duration = t_max - t_min;
    for (const auto& e : trace.events) {
        if (e.time < t_min || e.time > t_max) continue;
        out.events.push_back({e.time - t_min, e.a, e.b});
    }
    return out;
}

RemovalResult remove_nodes(const ContactTrace& trace, const std::set<NodeId>& ids) {
    RemovalResult result;
    std::vector<NodeId> relabel(trace.n, 0);
    std::vector<bool> removed(trace.n, false);
    for (NodeId id : ids) {
        if (id < trace.n) removed[id] = true;
    }
    NodeId next = 0;
    for (NodeId v = 0; v < trace.n; ++v) {
        if (removed[v]) continue;
        relabel[v] = next;
        result.relabel[v] = next;
        ++next;
    }
    result.trace.n = next;
    result.trace.duration = trace.duration;
    for (const auto& e : trace.events) {
        if (removed[e.a] || removed[e.b]) continue;
        result.trace.events.push_back({e.time, relabel[e.a], relabel[e.b]});
    }
    return result;
}

ContactTrace repeat_trace(const ContactTrace& trace, std::uint32_t k) {
    if (k < 1) throw TraceError("repeat_trace: k must be >= 1");
    ContactTrace out;
    out.n = trace.n;
    out.duration = trace.duration * static_cast<Seconds>(k);
    out.events.reserve(trace.events.size() * k);
    for (std::uint32_t i = 0; i < k; ++i) {
        Seconds shift = trace.duration * static_cast<Seconds>(i);
        for (const auto& e : trace.events) {
            out.events.push_back({e.time + shift, e.a, e.b});
        }
    }
    return out;
}

MeetingStats meeting_counts(const ContactTrace& trace, double isolated_quantile) {
    MeetingStats stats;
    stats.counts.assign(trace.n, 0);
    for (const auto& e : trace.events) {
        ++stats.counts[e.a];
        ++stats.counts[e.b];
    }
    if (trace.n == 0) return stats;
    std::vector<std::int64_t> sorted = stats.counts;
    std::sort(sorted.begin(), sorted.end());
    auto idx = static_cast<std::size_t>(isolated_quantile * static_cast<double>(trace.n - 1));
    idx = std::min(idx, sorted.size() - 1);
    stats.threshold = sorted[idx];
    for (NodeId v = 0; v < trace.n; ++v) {
        if (stats.counts[v] <= stats.threshold) stats.isolated.push_back(v);
    }
    return stats;
}

}  // namespace capsim
