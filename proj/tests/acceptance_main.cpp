// Acceptance gate for the simulator: ten end-to-end criteria, one
// [PASS]/[FAIL] line each, exit code = number of failures. Every tolerance
// is pinned in this file. Criterion 9 needs the real conference trace
// (CAPSIM_INFOCOM_TRACE); without it the criterion reports [SKIP] and the
// property-based criteria 4-8 stand in as the substitute.
//
// Build provides CAPSIM_CLI_PATH (the capsim binary) and CAPSIM_PAPER_SPEC
// (the bundled full-sweep spec file) so criteria 9 and 10 exercise the real
// command-line entry point.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "capsim/config.hpp"
#include "capsim/engine.hpp"
#include "capsim/experiment.hpp"
#include "capsim/json_io.hpp"
#include "capsim/protocol.hpp"
#include "capsim/trace.hpp"
#include "support/microtrace.hpp"
#include "support/oracle.hpp"
#include "support/synthetic.hpp"

namespace fs = std::filesystem;
using namespace capsim;

namespace {

// ---------------------------------------------------------------- scaffolding

int g_failures = 0;
int g_passed = 0;
int g_skipped = 0;

// body returns "" on pass, "SKIP: ..." to skip, anything else is the failure
// reason. A criterion with a stated runtime budget fails when it blows it.
void criterion(int index, const std::string& name, double budget_s,
               const std::function<std::string()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string verdict;
    try {
        verdict = body();
    } catch (const std::exception& e) {
        verdict = std::string("unexpected exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (verdict.empty() && budget_s > 0.0 && elapsed > budget_s) {
        std::ostringstream os;
        os << "runtime " << elapsed << " s exceeds the " << budget_s << " s budget";
        verdict = os.str();
    }
    std::ostringstream line;
    line.setf(std::ios::fixed);
    line.precision(2);
    if (verdict.empty()) {
        ++g_passed;
        line << "[PASS] " << index << ". " << name << " (" << elapsed << " s)";
    } else if (verdict.rfind("SKIP:", 0) == 0) {
        ++g_skipped;
        std::string why = verdict.substr(5);
        why.erase(0, why.find_first_not_of(' '));
        line << "[SKIP] " << index << ". " << name << " — " << why;
    } else {
        ++g_failures;
        line << "[FAIL] " << index << ". " << name << " (" << elapsed << " s): " << verdict;
    }
    std::cout << line.str() << std::endl;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// ------------------------------------------------------------ shared fixtures

// Capture campaign over a 12-node synthetic community trace: 10 social nodes,
// one sparse mover, one fully silent node (id 11) nobody ever meets. All five
// protocols, two sweep values, five capture waves per node = 600 runs.
struct CampaignFixture {
    ContactTrace trace;
    CampaignSpec spec;
    CampaignResult result;
    NodeId silent = 0;
};

std::optional<CampaignFixture> g_campaign;
std::string g_campaign_error = "campaign fixture was not built";

const CampaignFixture* campaign_fixture() {
    if (g_campaign) return &*g_campaign;
    return nullptr;
}

void build_campaign_fixture() {
    testing::SyntheticSpec shape;
    shape.n = 12;
    shape.duration = 200000;
    shape.communities = 3;
    shape.base_period = 2000;
    shape.sparse_nodes = 1;
    shape.silent_nodes = 1;
    shape.seed = 1;

    CampaignFixture fx;
    fx.trace = testing::make_synthetic_trace(shape);
    fx.silent = shape.n - 1;  // silent ids are the highest ones
    fx.spec.protocols = {ProtocolKind::Benchmark, ProtocolKind::Base, ProtocolKind::Booking,
                         ProtocolKind::Adaptive, ProtocolKind::AdaBo};
    fx.spec.lambdas = {12600, 18000};
    fx.spec.grid_start = 90000;
    fx.spec.grid_step = 20000;
    fx.spec.grid_intervals = 5;  // last capture 170000; 170000 + 18060 fits 200000
    fx.spec.measure_from = 84000;
    // knobs keep their defaults: delta 60, gamma 3600, sigma 0, one tracked
    // slot, 5-entry short memory refreshed every 21600 s, 42000 s setup,
    // exchange cap 3 — the full-sweep configuration.
    fx.result = run_campaign(fx.spec, fx.trace);
    g_campaign = std::move(fx);
}

// Stand-in for the real conference trace, shaped by the same pipeline:
// 43 raw nodes windowed to 42000 s, 4 dropped, repeated x10 -> 39 nodes over
// 420000 s. Built by criterion 3 and reused by criterion 10.
std::optional<ContactTrace> g_standin;

fs::path work_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "capsim-acceptance";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

// ------------------------------------------------------------------ criteria

std::string c1_benchmark_closed_form() {
    const Rational rate = benchmark_message_rate(3600, 12000, 39);
    if (rate.num != 117 || rate.den != 10) {
        return "closed form: expected 117/10 = 11.7 messages/node/hour, got " +
               std::to_string(rate.num) + "/" + std::to_string(rate.den);
    }

    // Counted heartbeat run over 17 claim periods; no meetings are needed.
    ContactTrace trace;
    trace.n = 39;
    trace.duration = 204000;
    ProtocolConfig cfg;
    cfg.kind = ProtocolKind::Benchmark;
    cfg.tau = 12000;
    const SimulationResult r = run_simulation(trace, cfg, std::nullopt, 0);
    const double hours = static_cast<double>(trace.duration) / 3600.0;
    const double measured = static_cast<double>(r.ledger.total_sent()) / trace.n / hours;
    const double tolerance = 11.7 * 12000.0 / 204000.0;  // one claim period at the edges
    if (std::abs(measured - 11.7) > tolerance) {
        return "counted rate " + format_double(measured) + " not within " +
               format_double(tolerance) + " of 11.7";
    }
    return "";
}

std::string c2_grid_arithmetic() {
    const auto grid = build_capture_grid(39, 100000, 21600, 13);
    if (grid.size() != 507) return "expected 507 scenarios, got " + std::to_string(grid.size());
    if (!(grid.front() == CaptureScenario{0, 100000})) return "first scenario is not node 0 at 100000 s";
    if (!(grid.back() == CaptureScenario{38, 359200})) {
        return "last scenario should be node 38 at 359200 s, got node " +
               std::to_string(grid.back().victim) + " at " +
               std::to_string(grid.back().capture_time) + " s";
    }
    std::set<std::pair<NodeId, Seconds>> distinct;
    for (const auto& s : grid) distinct.emplace(s.victim, s.capture_time);
    if (distinct.size() != 507) return "scenarios are not distinct";
    if (!(grid[39] == CaptureScenario{0, 121600})) return "grid is not interval-major";
    return "";
}

std::string c3_trace_pipeline() {
    testing::SyntheticSpec shape;
    shape.n = 43;
    shape.duration = 120000;
    shape.communities = 4;
    shape.base_period = 4000;
    shape.sparse_nodes = 2;
    shape.silent_nodes = 2;
    shape.seed = 5;
    const ContactTrace raw = testing::make_synthetic_trace(shape);

    const ContactTrace windowed = filter_window(raw, 73000, 115000);
    if (windowed.duration != 42000) {
        return "window duration " + std::to_string(windowed.duration) + ", expected 42000";
    }
    if (windowed.events.empty()) return "windowed stand-in has no events";

    const RemovalResult removed = remove_nodes(windowed, {21, 40, 41, 42});
    if (removed.trace.n != 39) {
        return "after dropping 4 ids n=" + std::to_string(removed.trace.n) + ", expected 39";
    }
    if (removed.relabel.size() != 39) return "relabel map should cover the 39 survivors";

    const ContactTrace repeated = repeat_trace(removed.trace, 10);
    repeated.validate();
    if (repeated.duration != 420000) {
        return "pipeline duration " + std::to_string(repeated.duration) + ", expected 420000";
    }
    if (repeated.events.size() != 10 * removed.trace.events.size()) {
        return "repeat did not multiply the event count by 10";
    }
    g_standin = repeated;
    return "";
}

std::string c4_zero_false_positives() {
    build_campaign_fixture();
    const CampaignFixture* fx = campaign_fixture();
    if (!fx) return g_campaign_error;
    const auto& result = fx->result;
    if (!result.errors.empty()) return "campaign reported failed runs: " + result.errors.front();
    if (result.rows.size() < 500) {
        return "only " + std::to_string(result.rows.size()) + " runs; need at least 500";
    }
    std::int64_t detections = 0;
    std::int64_t messages = 0;
    for (const auto& row : result.rows) {
        if (row.false_positives != 0) {
            return to_string(row.protocol) + " lambda=" + std::to_string(row.lambda) +
                   " capture " + std::to_string(row.scenario.victim) + "@" +
                   std::to_string(row.scenario.capture_time) + " produced " +
                   std::to_string(row.false_positives) + " false positives";
        }
        detections += row.detection_time.has_value() ? 1 : 0;
        messages += row.messages;
    }
    if (detections == 0 || messages == 0) return "campaign was vacuous (no detections or messages)";
    return "";
}

std::string c5_first_class_coverage() {
    const CampaignFixture* fx = campaign_fixture();
    if (!fx) return g_campaign_error;
    for (const auto& agg : fx->result.aggregates) {
        const bool first_class =
            agg.protocol == ProtocolKind::Booking || agg.protocol == ProtocolKind::AdaBo;
        if (first_class && agg.false_negatives != 0) {
            return to_string(agg.protocol) + " lambda=" + std::to_string(agg.lambda) + " missed " +
                   std::to_string(agg.false_negatives) + " captures (fn_rate " +
                   format_double(agg.fn_rate()) + ")";
        }
    }
    bool silent_was_captured = false;
    bool base_missed_silent = false;
    for (const auto& row : fx->result.rows) {
        if (row.scenario.victim != fx->silent) continue;
        if (row.protocol == ProtocolKind::Booking || row.protocol == ProtocolKind::AdaBo) {
            silent_was_captured = true;
            if (row.false_negative) return "token protocol missed the never-met node";
        }
        if (row.protocol == ProtocolKind::Base && row.false_negative) base_missed_silent = true;
    }
    if (!silent_was_captured) return "grid never captured the never-met node; fixture is broken";
    if (!base_missed_silent) {
        return "first-met tracking detected the never-met node; the contrast fixture is broken";
    }
    return "";
}

std::string c6_oracle_equivalence() {
    const ProtocolKind kinds[] = {ProtocolKind::Base, ProtocolKind::Booking, ProtocolKind::Adaptive};
    std::int64_t alarms = 0;
    std::int64_t detections = 0;
    std::int64_t misses = 0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        for (const ProtocolKind kind : kinds) {
            const testing::MicroCase mc = testing::make_micro_case(seed, kind);
            const SimulationResult got =
                run_simulation(mc.trace, mc.cfg, mc.scenario, mc.measure_from);
            const SimulationResult want =
                testing::oracle_run(mc.trace, mc.cfg, mc.scenario, mc.measure_from);
            if (!(got == want)) {
                return "engine and oracle disagree on seed " + std::to_string(seed) + " (" +
                       to_string(kind) + ")";
            }
            alarms += static_cast<std::int64_t>(got.alarm_log.size());
            detections += got.detection_time.has_value() ? 1 : 0;
            misses += got.false_negative ? 1 : 0;
        }
    }
    if (alarms < 30 || detections < 10 || misses < 10) {
        return "micro-family too tame to be meaningful (alarms " + std::to_string(alarms) +
               ", detections " + std::to_string(detections) + ", misses " + std::to_string(misses) +
               ")";
    }
    return "";
}

std::string c7_detection_bound() {
    const CampaignFixture* fx = campaign_fixture();
    if (!fx) return g_campaign_error;
    std::int64_t detected = 0;
    for (const auto& row : fx->result.rows) {
        if (!row.detection_time) continue;
        ++detected;
        // The sweep value is the time-out lambda for the mobility protocols
        // and the claim period tau for the heartbeat, so one bound covers both.
        if (*row.detection_time > row.lambda) {
            return to_string(row.protocol) + " lambda=" + std::to_string(row.lambda) +
                   " capture " + std::to_string(row.scenario.victim) + "@" +
                   std::to_string(row.scenario.capture_time) + ": detection " +
                   std::to_string(*row.detection_time) + " s exceeds the bound";
        }
        if (*row.detection_time < 0) return "negative detection time";
    }
    if (detected < 400) {
        return "only " + std::to_string(detected) + " detected runs; bound check is undersampled";
    }
    return "";
}

class TokenConservationObserver final : public EngineObserver {
  public:
    explicit TokenConservationObserver(std::uint32_t max_exchanges) : cap_(max_exchanges) {}

    void after_event(Seconds now, const std::vector<NodeState>& nodes,
                     const std::vector<bool>& alive) override {
        (void)alive;  // dead nodes keep their token; conservation spans everyone
        ++steps_;
        if (!error_.empty()) return;
        std::vector<bool> seen(nodes.size(), false);
        for (const NodeState& node : nodes) {
            if (!node.has_token) {
                error_ = "node " + std::to_string(node.self) + " lost its token at " +
                         std::to_string(now) + " s";
                return;
            }
            if (node.token >= nodes.size() || seen[node.token]) {
                error_ = "token " + std::to_string(node.token) + " duplicated or out of range at " +
                         std::to_string(now) + " s";
                return;
            }
            seen[node.token] = true;
            // One over-cap acceptance is allowed; proposing past the cap is not.
            if (node.exchange_count > cap_ + 1) {
                error_ = "node " + std::to_string(node.self) + " reached " +
                         std::to_string(node.exchange_count) + " exchanges at " +
                         std::to_string(now) + " s (cap " + std::to_string(cap_) + ")";
                return;
            }
        }
    }

    const std::string& error() const { return error_; }
    std::int64_t steps() const { return steps_; }

  private:
    std::uint32_t cap_;
    std::string error_;
    std::int64_t steps_ = 0;
};

std::string c8_token_conservation() {
    const CampaignFixture* fx = campaign_fixture();
    if (!fx) return g_campaign_error;
    ProtocolConfig cfg = fx->spec.knobs;
    cfg.kind = ProtocolKind::AdaBo;
    cfg.lambda = 12600;

    const std::optional<CaptureScenario> samples[] = {
        std::nullopt,                         // capture-free steady state
        CaptureScenario{3, 100000},           // social victim mid-trace
        CaptureScenario{fx->silent, 150000},  // the never-met node
    };
    for (const auto& scenario : samples) {
        TokenConservationObserver observer(cfg.max_exchanges);
        run_simulation(fx->trace, cfg, scenario, fx->spec.measure_from, &observer);
        if (!observer.error().empty()) return observer.error();
        if (observer.steps() < static_cast<std::int64_t>(fx->trace.events.size())) {
            return "observer saw fewer steps than the trace has meetings";
        }
    }
    return "";
}

// Shared by criteria 9 and 10: the full-sweep spec runs against the real
// conference trace when CAPSIM_INFOCOM_TRACE is set, else the stand-in.
std::string campaign_trace_path() {
    if (const char* env = std::getenv("CAPSIM_INFOCOM_TRACE")) return env;
    if (!g_standin) return "";
    const fs::path path = work_dir() / "standin.csv";
    if (!fs::exists(path)) {
        std::ofstream out(path, std::ios::binary);
        serialize_contact_trace(*g_standin, out);
    }
    return path.string();
}

std::string c9_paper_scale() {
    const char* env = std::getenv("CAPSIM_INFOCOM_TRACE");
    if (!env) {
        return "SKIP: real conference trace not supplied (set CAPSIM_INFOCOM_TRACE); the "
               "published numbers are explicitly NOT reproducible here and criteria 4-8 "
               "stand as the property-based substitute";
    }
    CampaignSpec spec = load_campaign_spec(CAPSIM_PAPER_SPEC);
    spec.trace_path = env;
    const CampaignResult result = run_campaign(spec);
    if (!result.errors.empty()) return "failed runs: " + result.errors.front();

    std::map<Seconds, std::map<ProtocolKind, double>> cost;  // lambda -> protocol -> msgs/node/h
    std::int64_t base_fn = 0, base_runs = 0, adaptive_fn = 0, adaptive_runs = 0;
    for (const auto& agg : result.aggregates) {
        cost[agg.lambda][agg.protocol] = result.msgs_per_node_per_hour(agg);
        if (agg.protocol == ProtocolKind::Base) {
            base_fn += agg.false_negatives;
            base_runs += agg.runs;
        }
        if (agg.protocol == ProtocolKind::Adaptive) {
            adaptive_fn += agg.false_negatives;
            adaptive_runs += agg.runs;
        }
    }

    double worst_non_benchmark = 0.0;
    for (const auto& [lambda, by_proto] : cost) {
        const double bench = by_proto.at(ProtocolKind::Benchmark);
        for (const auto& [proto, c] : by_proto) {
            if (proto == ProtocolKind::Benchmark) continue;
            if (c >= bench) {
                return "at lambda " + std::to_string(lambda) + " the heartbeat is not the "
                       "costliest protocol";
            }
            worst_non_benchmark = std::max(worst_non_benchmark, c);
        }
        if (by_proto.at(ProtocolKind::AdaBo) > by_proto.at(ProtocolKind::Booking)) {
            return "at lambda " + std::to_string(lambda) + " the hybrid costs more than booking";
        }
        if (by_proto.at(ProtocolKind::Adaptive) > by_proto.at(ProtocolKind::Base)) {
            return "at lambda " + std::to_string(lambda) + " adaptive costs more than base";
        }
    }
    if (std::abs(worst_non_benchmark - 5.2) > 0.3 * 5.2) {
        return "worst non-heartbeat cost " + format_double(worst_non_benchmark) +
               " msgs/node/hour is outside 5.2 +/- 30%";
    }
    const double base_rate = base_runs ? static_cast<double>(base_fn) / base_runs : -1.0;
    const double adaptive_rate =
        adaptive_runs ? static_cast<double>(adaptive_fn) / adaptive_runs : -1.0;
    if (std::abs(base_rate - 0.436) > 0.08) {
        return "first-met tracking misses " + format_double(base_rate * 100.0) +
               "% of captures, outside 43.6% +/- 8pp";
    }
    if (std::abs(adaptive_rate - 0.429) > 0.08) {
        return "adaptive tracking misses " + format_double(adaptive_rate * 100.0) +
               "% of captures, outside 42.9% +/- 8pp";
    }
    return "";
}

std::string c10_cli_determinism() {
    const std::string trace = campaign_trace_path();
    if (trace.empty()) return "stand-in trace unavailable (criterion 3 must build it first)";

    const fs::path dir = work_dir();
    const std::string cli = CAPSIM_CLI_PATH;
    const std::string spec = CAPSIM_PAPER_SPEC;
    for (const int workers : {1, 4}) {
        const fs::path out = dir / ("run-w" + std::to_string(workers));
        const fs::path stdout_file = dir / ("manifest-w" + std::to_string(workers) + ".json");
        const std::string cmd = cli + " campaign --spec " + spec + " --trace " + trace +
                                " --workers " + std::to_string(workers) + " --out " + out.string() +
                                " > " + stdout_file.string() + " 2> /dev/null";
        const int rc = std::system(cmd.c_str());
        if (rc != 0) return "capsim campaign (workers " + std::to_string(workers) +
                            ") exited with status " + std::to_string(rc);
    }

    const char* files[] = {"summary.csv",  "campaign.json", "manifest.json", "benchmark.dat",
                           "base.dat",     "booking.dat",   "adaptive.dat",  "adabo.dat"};
    for (const char* name : files) {
        const std::string a = read_file(dir / "run-w1" / name);
        const std::string b = read_file(dir / "run-w4" / name);
        if (a != b) return std::string(name) + " differs between worker counts";
        if (a.empty()) return std::string(name) + " is empty";
    }
    if (read_file(dir / "manifest-w1.json") != read_file(dir / "manifest-w4.json")) {
        return "stdout manifests differ between worker counts";
    }
    return "";
}

}  // namespace

int main() {
    std::cout << "acceptance gate: capture-detection simulator\n";
    criterion(1, "heartbeat closed form matches a counted run", 1.0, c1_benchmark_closed_form);
    criterion(2, "capture grid enumerates 39 x 13 = 507 scenarios", 1.0, c2_grid_arithmetic);
    criterion(3, "window/drop/repeat pipeline yields 39 nodes over 420000 s", 5.0,
              c3_trace_pipeline);
    criterion(4, "no false positives across a 600-run campaign", 120.0, c4_zero_false_positives);
    criterion(5, "token protocols cover never-met nodes; first-met tracking does not", 60.0,
              c5_first_class_coverage);
    criterion(6, "engine matches the brute-force oracle on 200 micro-traces x 3 protocols", 60.0,
              c6_oracle_equivalence);
    criterion(7, "every detection lands within one time-out of the capture", 0.0,
              c7_detection_bound);
    criterion(8, "booking tokens stay a permutation at every event step", 0.0,
              c8_token_conservation);
    criterion(9, "published-scale reproduction on the real conference trace", 900.0,
              c9_paper_scale);
    criterion(10, "campaign outputs are byte-identical across worker counts", 0.0,
              c10_cli_determinism);

    std::cout << g_passed << " passed, " << g_failures << " failed, " << g_skipped
              << " skipped\n";
    return g_failures == 0 ? 0 : 1;
}
