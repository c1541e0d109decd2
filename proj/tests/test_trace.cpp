#include <doctest.h>

#include <sstream>

#include "capsim/trace.hpp"

using namespace capsim;

namespace {

ContactTrace parse(const std::string& text) {
    std::istringstream in(text);
    return parse_contact_trace(in);
}

}  // namespace

TEST_CASE("parse canonicalizes orientation and infers n") {
    auto t = parse("0,1,2\n100,2,1\n");
    REQUIRE(t.events.size() == 2);
    CHECK(t.n == 3);
    CHECK(t.duration == 100);
    CHECK(t.events[0] == MeetingEvent{0, 1, 2});
    CHECK(t.events[1] == MeetingEvent{100, 1, 2});
}

TEST_CASE("parse rejects empty input") {
    CHECK_THROWS_WITH_AS(parse(""), doctest::Contains("no events"), TraceError);
    CHECK_THROWS_AS(parse("# only comments\n\n"), TraceError);
}

TEST_CASE("parse collapses duplicates and reversed pairs: 6 lines -> 5 events") {
    // one exact duplicate (t=10) and one reversed pair that is a distinct meeting (t=30 vs t=40)
    auto t = parse(
        "# fixture\n"
        "0,0,1\n"
        "10,1,2\n"
        "10,1,2\n"
        "30,2,3\n"
        "40,3,2\n"
        "50,0,3\n");
    CHECK(t.events.size() == 5);
    CHECK(t.n == 4);
}

TEST_CASE("parse accepts optional header and validates against it") {
    auto t = parse("n=6,duration=500\n10,0,1\n");
    CHECK(t.n == 6);
    CHECK(t.duration == 500);
    CHECK(t.events.size() == 1);

    // header-only trace is a legal (empty) trace
    auto empty = parse("n=4,duration=100\n");
    CHECK(empty.n == 4);
    CHECK(empty.events.empty());

    CHECK_THROWS_AS(parse("n=2,duration=500\n10,0,5\n"), TraceError);
    CHECK_THROWS_AS(parse("n=6,duration=5\n10,0,1\n"), TraceError);
}

TEST_CASE("parse reports malformed lines with line numbers") {
    CHECK_THROWS_WITH_AS(parse("0,1,2\nbogus\n"), doctest::Contains("line 2"), TraceError);
    CHECK_THROWS_WITH_AS(parse("0,1\n"), doctest::Contains("line 1"), TraceError);
    CHECK_THROWS_WITH_AS(parse("0,3,3\n"), doctest::Contains("self-meeting"), TraceError);
    CHECK_THROWS_WITH_AS(parse("-5,1,2\n"), doctest::Contains("negative time"), TraceError);
    CHECK_THROWS_AS(parse("0,-1,2\n"), TraceError);
}

TEST_CASE("parse tolerates CRLF and sorts by (time,a,b)") {
    auto t = parse("20,0,3\r\n20,0,1\r\n5,2,4\r\n");
    REQUIRE(t.events.size() == 3);
    CHECK(t.events[0] == MeetingEvent{5, 2, 4});
    CHECK(t.events[1] == MeetingEvent{20, 0, 1});
    CHECK(t.events[2] == MeetingEvent{20, 0, 3});
}

TEST_CASE("serialize/parse round-trip preserves the trace") {
    auto t = parse("n=7,duration=300\n0,1,2\n100,2,1\n250,5,6\n");
    auto text = serialize_contact_trace(t);
    auto again = parse(text);
    CHECK(again.n == t.n);
    CHECK(again.duration == t.duration);
    CHECK(again.events == t.events);
    // purity: serializing twice gives identical bytes
    CHECK(serialize_contact_trace(again) == text);
}

TEST_CASE("filter_window keeps closed bounds and shifts times") {
    auto t = parse("10,0,1\n20,0,1\n30,0,1\n");
    auto w = filter_window(t, 15, 25);
    REQUIRE(w.events.size() == 1);
    CHECK(w.events[0] == MeetingEvent{5, 0, 1});
    CHECK(w.duration == 10);
    CHECK(w.n == t.n);
    CHECK_THROWS_AS(filter_window(t, 25, 15), TraceError);
}

TEST_CASE("filter_window over whole trace is identity up to shift") {
    auto t = parse("10,0,1\n20,1,2\n30,0,2\n");
    auto w = filter_window(t, 10, 30);
    REQUIRE(w.events.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(w.events[i].time == t.events[i].time - 10);
        CHECK(w.events[i].a == t.events[i].a);
        CHECK(w.events[i].b == t.events[i].b);
    }
}

TEST_CASE("remove_nodes relabels densely and preserves times") {
    auto t = parse("n=4,duration=100\n0,0,1\n10,1,2\n20,2,3\n30,1,3\n");
    auto r = remove_nodes(t, {2});
    CHECK(r.trace.n == 3);
    REQUIRE(r.trace.events.size() == 2);
    CHECK(r.trace.events[0] == MeetingEvent{0, 0, 1});
    CHECK(r.trace.events[1] == MeetingEvent{30, 1, 2});  // node 3 -> 2, time unchanged
    CHECK(r.relabel.at(0) == 0);
    CHECK(r.relabel.at(1) == 1);
    CHECK(r.relabel.at(3) == 2);
    CHECK(r.relabel.count(2) == 0);
    CHECK(r.trace.duration == t.duration);
}

TEST_CASE("remove_nodes with empty set is a no-op") {
    auto t = parse("0,0,1\n10,1,2\n");
    auto r = remove_nodes(t, {});
    CHECK(r.trace.events == t.events);
    CHECK(r.trace.n == t.n);
    CHECK(r.relabel.size() == t.n);
    // removing an absent id is also a no-op
    auto r2 = remove_nodes(t, {99});
    CHECK(r2.trace.events == t.events);
}

TEST_CASE("repeat_trace shifts each copy by the duration") {
    auto t = parse("n=2,duration=20\n5,0,1\n10,0,1\n");
    auto r = repeat_trace(t, 2);
    CHECK(r.duration == 40);
    REQUIRE(r.events.size() == 4);
    CHECK(r.events[0].time == 5);
    CHECK(r.events[1].time == 10);
    CHECK(r.events[2].time == 25);
    CHECK(r.events[3].time == 30);

    auto id = repeat_trace(t, 1);
    CHECK(id.events == t.events);
    CHECK(id.duration == t.duration);
    CHECK_THROWS_AS(repeat_trace(t, 0), TraceError);
}

TEST_CASE("repeat after filter multiplies the event count") {
    auto t = parse("10,0,1\n20,1,2\n30,0,2\n40,1,3\n");
    auto f = filter_window(t, 15, 35);
    auto r = repeat_trace(f, 4);
    CHECK(r.events.size() == 4 * f.events.size());
    r.validate();
}

TEST_CASE("meeting_counts tallies both endpoints") {
    auto t = parse("0,1,2\n5,1,3\n9,2,3\n");
    auto s = meeting_counts(t);
    REQUIRE(s.counts.size() == t.n);
    CHECK(s.counts[1] == 2);
    CHECK(s.counts[2] == 2);
    CHECK(s.counts[3] == 2);
    std::int64_t sum = 0;
    for (auto c : s.counts) sum += c;
    CHECK(sum == 2 * static_cast<std::int64_t>(t.events.size()));
}

TEST_CASE("meeting_counts on an empty trace is all zeros") {
    auto t = parse("n=3,duration=10\n");
    auto s = meeting_counts(t);
    REQUIRE(s.counts.size() == 3);
    for (auto c : s.counts) CHECK(c == 0);
    CHECK(s.isolated.size() == 3);  // all at the zero threshold
}

TEST_CASE("meeting_counts flags low-count nodes as isolated") {
    // node 3 meets once, everyone else several times
    auto t = parse(
        "n=4,duration=100\n"
        "0,0,1\n10,0,1\n20,0,2\n30,1,2\n40,0,2\n50,1,2\n60,2,3\n");
    auto s = meeting_counts(t, 0.1);
    REQUIRE(s.isolated.size() == 1);
    CHECK(s.isolated[0] == 3);
}

TEST_CASE("validate rejects broken invariants") {
    ContactTrace t;
    t.n = 2;
    t.duration = 10;
    t.events = {{5, 0, 1}};
    CHECK_NOTHROW(t.validate());
    t.events = {{5, 1, 0}};
    CHECK_THROWS_AS(t.validate(), TraceError);
    t.events = {{5, 0, 1}, {3, 0, 1}};
    CHECK_THROWS_AS(t.validate(), TraceError);
    t.events = {{5, 0, 3}};
    CHECK_THROWS_AS(t.validate(), TraceError);
    t.events = {{50, 0, 1}};
    CHECK_THROWS_AS(t.validate(), TraceError);
}
