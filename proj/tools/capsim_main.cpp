// capsim: command-line front end over the trace / protocol / engine /
// experiment modules. Five subcommands cover the whole workflow:
//
//   preprocess   window, drop, and repeat a contact trace -> canonical CSV
//   stats        per-node meeting counts and the low-activity tail
//   simulate     one protocol run over a trace, JSON result on stdout
//   campaign     full (protocol x lambda x capture grid) sweep from a spec file
//   export       convert a saved campaign.json into csv / json / plot data
//
// Human-readable progress goes to stderr; machine output to stdout or files.
// Exit codes: 0 success, 1 usage error, 2 bad data or configuration,
// 3 unexpected runtime failure.

#include <CLI11.hpp>

#include <charconv>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
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

namespace {

using capsim::CaptureScenario;
using capsim::ConfigError;
using capsim::ContactTrace;
using capsim::NodeId;
using capsim::Seconds;

std::int64_t to_i64(const std::string& token, const char* what) {
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
        throw ConfigError(std::string(what) + ": expected an integer, got '" + token + "'");
    }
    return out;
}

NodeId to_node(const std::string& token, const char* what) {
    const std::int64_t v = to_i64(token, what);
    if (v < 0) throw ConfigError(std::string(what) + ": node ids are non-negative, got '" + token + "'");
    return static_cast<NodeId>(v);
}

// "A:B" -> closed window [A, B] in seconds.
std::pair<Seconds, Seconds> parse_window(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
        throw ConfigError("window: expected A:B, got '" + text + "'");
    }
    return {to_i64(text.substr(0, colon), "window start"), to_i64(text.substr(colon + 1), "window end")};
}

// "V@T" -> capture of node V at instant T.
CaptureScenario parse_capture(const std::string& text) {
    const auto at = text.find('@');
    if (at == std::string::npos || at == 0 || at + 1 == text.size()) {
        throw ConfigError("capture: expected VICTIM@TIME, got '" + text + "'");
    }
    return {to_node(text.substr(0, at), "capture victim"), to_i64(text.substr(at + 1), "capture time")};
}

ContactTrace read_trace(const std::string& path) {
    if (path == "-") return capsim::parse_contact_trace(std::cin);
    return capsim::parse_contact_trace_file(path);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open output file: " + path);
    out << content;
    if (!out) throw ConfigError("failed writing output file: " + path);
}

std::map<std::string, std::string> load_defaults(const std::string& config_path) {
    if (config_path.empty()) return {};
    return capsim::parse_key_value_file(config_path);
}

void describe_trace(const std::string& label, const ContactTrace& trace) {
    std::cerr << label << ": n=" << trace.n << ", events=" << trace.events.size()
              << ", duration=" << trace.duration << " s\n";
}

// ---------------------------------------------------------------- preprocess

struct PreprocessOpts {
    std::string trace;
    std::string out;
    std::string window;
    std::string drop;
    std::string config;
    std::uint32_t repeat = 1;
    bool symmetrize = false;
    CLI::Option* o_out = nullptr;
    CLI::Option* o_window = nullptr;
    CLI::Option* o_drop = nullptr;
    CLI::Option* o_repeat = nullptr;
    CLI::Option* o_symmetrize = nullptr;
};

void run_preprocess(const PreprocessOpts& o) {
    auto kv = load_defaults(o.config);
    if (o.o_window->count() > 0) kv["window"] = o.window;
    if (o.o_drop->count() > 0) kv["drop"] = o.drop;
    if (o.o_repeat->count() > 0) kv["repeat"] = std::to_string(o.repeat);
    if (o.o_symmetrize->count() > 0) kv["symmetrize"] = "true";
    if (o.o_out->count() > 0) kv["out"] = o.out;

    ContactTrace trace = read_trace(o.trace);
    describe_trace("read " + o.trace, trace);

    // Parsing already stores every meeting once in canonical orientation and
    // collapses duplicate sightings, so the symmetrize stage is a stated
    // no-op; the flag lets pipelines spell the step out (and is validated).
    (void)capsim::config_bool(kv, "symmetrize", false);

    const std::string window = capsim::config_string(kv, "window", "");
    if (!window.empty()) {
        const auto [t_min, t_max] = parse_window(window);
        trace = capsim::filter_window(trace, t_min, t_max);
        describe_trace("window " + window, trace);
    }

    std::map<NodeId, NodeId> relabel;
    const std::string drop = capsim::config_string(kv, "drop", "");
    if (!drop.empty()) {
        std::set<NodeId> ids;
        for (const auto& token : capsim::split_list(drop)) ids.insert(to_node(token, "drop"));
        auto removed = capsim::remove_nodes(trace, ids);
        trace = std::move(removed.trace);
        relabel = std::move(removed.relabel);
        describe_trace("drop " + drop, trace);
    }

    const std::int64_t repeat = capsim::config_int(kv, "repeat", 1);
    if (repeat < 1) throw ConfigError("repeat: must be at least 1");
    if (repeat > 1) {
        trace = capsim::repeat_trace(trace, static_cast<std::uint32_t>(repeat));
        describe_trace("repeat x" + std::to_string(repeat), trace);
    }

    trace.validate();
    const std::string out = capsim::config_string(kv, "out", "");
    if (out.empty()) {
        capsim::serialize_contact_trace(trace, std::cout);
    } else {
        write_file(out, capsim::serialize_contact_trace(trace));
        write_file(out + ".json", capsim::trace_sidecar_json(trace, relabel));
        std::cerr << "wrote " << out << " and " << out << ".json\n";
    }
}

void add_preprocess(CLI::App& app) {
    auto o = std::make_shared<PreprocessOpts>();
    CLI::App* sub = app.add_subcommand(
        "preprocess", "Window, drop, and repeat a contact trace; emit canonical CSV");
    sub->add_option("trace", o->trace, "input trace CSV, one 'time,a,b' meeting per line ('-' reads stdin)")
        ->required();
    o->o_out = sub->add_option(
        "-o,--out", o->out,
        "output CSV path; a JSON sidecar {n, duration, relabel} lands at <out>.json "
        "(CSV goes to stdout and no sidecar is written when omitted)");
    o->o_window = sub->add_option(
        "--window", o->window,
        "keep events with A <= time <= B and shift times so A maps to 0 (format A:B, seconds)");
    o->o_drop = sub->add_option(
        "--drop", o->drop,
        "comma-separated node ids to remove; survivors are relabeled onto a dense 0..n'-1 "
        "range preserving id order, and the sidecar records the mapping");
    o->o_repeat = sub->add_option("--repeat", o->repeat, "concatenate K copies, copy i shifted by i*duration")
                      ->check(CLI::PositiveNumber);
    o->o_symmetrize = sub->add_flag(
        "--symmetrize", o->symmetrize,
        "merge directed sightings (a,b)/(b,a) into one symmetric meeting; parsing always "
        "canonicalizes, the flag just makes pipelines explicit");
    sub->add_option("--config", o->config,
                    "key=value file supplying defaults for window/drop/repeat/symmetrize/out; "
                    "explicit flags win");
    sub->footer("Stages apply in a fixed order: window, then drop, then repeat.");
    sub->callback([o] { run_preprocess(*o); });
}

// --------------------------------------------------------------------- stats

struct StatsOpts {
    std::string trace;
    std::string config;
    double quantile = 0.1;
    CLI::Option* o_quantile = nullptr;
};

void run_stats(const StatsOpts& o) {
    auto kv = load_defaults(o.config);
    if (o.o_quantile->count() > 0) kv["quantile"] = capsim::format_double(o.quantile);
    double quantile = 0.1;
    if (auto it = kv.find("quantile"); it != kv.end()) {
        try {
            std::size_t used = 0;
            quantile = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument(it->second);
        } catch (const std::exception&) {
            throw ConfigError("quantile: expected a number in [0,1], got '" + it->second + "'");
        }
    }
    if (quantile < 0.0 || quantile > 1.0) throw ConfigError("quantile: must be within [0,1]");

    const ContactTrace trace = read_trace(o.trace);
    describe_trace("read " + o.trace, trace);
    const capsim::MeetingStats stats = capsim::meeting_counts(trace, quantile);

    std::cout << "node_id,meeting_count\n";
    for (std::size_t id = 0; id < stats.counts.size(); ++id) {
        std::cout << id << ',' << stats.counts[id] << '\n';
    }

    std::cerr << "isolated nodes (meeting count <= " << stats.threshold << "): ";
    if (stats.isolated.empty()) {
        std::cerr << "none\n";
    } else {
        for (std::size_t i = 0; i < stats.isolated.size(); ++i) {
            std::cerr << (i ? ", " : "") << stats.isolated[i];
        }
        std::cerr << '\n';
    }
}

void add_stats(CLI::App& app) {
    auto o = std::make_shared<StatsOpts>();
    CLI::App* sub = app.add_subcommand(
        "stats", "Per-node meeting counts as CSV on stdout; low-activity tail on stderr");
    sub->add_option("trace", o->trace, "input trace CSV ('-' reads stdin)")->required();
    o->o_quantile = sub->add_option(
        "--quantile", o->quantile,
        "fraction of the count distribution flagged as isolated; the threshold is the "
        "count at this quantile (default 0.1)")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--config", o->config, "key=value file supplying a default quantile");
    sub->callback([o] { run_stats(*o); });
}

// ------------------------------------------------------------------ simulate

struct SimulateOpts {
    std::string trace;
    std::string config;
    std::string protocol;
    std::string assignment;
    std::string capture;
    Seconds lambda = 0;
    Seconds tau = 0;
    Seconds delta = 0;
    Seconds gamma = 0;
    Seconds sigma = 0;
    Seconds sms_refresh = 0;
    Seconds setup = 0;
    Seconds measure_from = 0;
    std::uint32_t k_tracked = 0;
    std::uint32_t sms_capacity = 0;
    std::uint32_t max_exchanges = 0;
    bool base_cooperation = false;
    bool strict_cap = false;
    bool flip_exchange_rule = false;
    bool adabo_admin_slot = true;
    bool benchmark_aligned = false;
    bool alarm_log = false;
    std::map<std::string, CLI::Option*> opts;  // kv key -> option, for overrides
};

void run_simulate(const SimulateOpts& o) {
    auto kv = load_defaults(o.config);
    auto set_if = [&](const char* key, const std::string& value) {
        auto it = o.opts.find(key);
        if (it != o.opts.end() && it->second->count() > 0) kv[key] = value;
    };
    set_if("protocol", o.protocol);
    set_if("lambda", std::to_string(o.lambda));
    set_if("tau", std::to_string(o.tau));
    set_if("delta", std::to_string(o.delta));
    set_if("gamma", std::to_string(o.gamma));
    set_if("sigma", std::to_string(o.sigma));
    set_if("k_tracked", std::to_string(o.k_tracked));
    set_if("sms_capacity", std::to_string(o.sms_capacity));
    set_if("sms_refresh_interval", std::to_string(o.sms_refresh));
    set_if("setup_duration", std::to_string(o.setup));
    set_if("max_exchanges", std::to_string(o.max_exchanges));
    set_if("booking_assignment", o.assignment);
    set_if("base_cooperation", o.base_cooperation ? "true" : "false");
    set_if("strict_cap", o.strict_cap ? "true" : "false");
    set_if("flip_exchange_rule", o.flip_exchange_rule ? "true" : "false");
    set_if("adabo_admin_slot", o.adabo_admin_slot ? "true" : "false");
    set_if("benchmark_aligned", o.benchmark_aligned ? "true" : "false");
    set_if("capture", o.capture);
    set_if("measure_from", std::to_string(o.measure_from));

    capsim::ProtocolConfig cfg;
    capsim::apply_protocol_keys(cfg, kv);
    const Seconds measure_from = capsim::config_int(kv, "measure_from", 0);
    const bool with_log = o.alarm_log || capsim::config_bool(kv, "alarm_log", false);

    std::optional<CaptureScenario> scenario;
    const std::string capture = capsim::config_string(kv, "capture", "");
    if (!capture.empty()) scenario = parse_capture(capture);

    const ContactTrace trace = read_trace(o.trace);
    describe_trace("read " + o.trace, trace);
    std::cerr << "simulate " << capsim::to_string(cfg.kind);
    if (scenario) {
        std::cerr << ", capture node " << scenario->victim << " at " << scenario->capture_time << " s";
    } else {
        std::cerr << ", no capture";
    }
    std::cerr << '\n';

    const capsim::SimulationResult result = capsim::run_simulation(trace, cfg, scenario, measure_from);
    if (result.detection_time) {
        std::cerr << "capture detected " << *result.detection_time << " s after injection\n";
    } else if (result.false_negative) {
        std::cerr << "capture missed (false negative)\n";
    }
    std::cout << capsim::simulation_json(result, with_log);
}

void add_simulate(CLI::App& app) {
    auto o = std::make_shared<SimulateOpts>();
    CLI::App* sub = app.add_subcommand(
        "simulate", "Run one protocol over a trace, optionally injecting a capture; JSON on stdout");
    sub->add_option("trace", o->trace, "input trace CSV ('-' reads stdin); the node count n comes from "
                    "its header or is inferred as max id + 1")->required();
    sub->add_option("--config", o->config,
                    "key=value file supplying defaults for every flag below (same keys campaign "
                    "spec files use); explicit flags win");
    auto& m = o->opts;
    m["protocol"] = sub->add_option("--protocol", o->protocol,
                                    "one of benchmark|base|booking|adaptive|adabo")
                        ->check(CLI::IsMember({"benchmark", "base", "booking", "adaptive", "adabo"}));
    m["lambda"] = sub->add_option("--lambda", o->lambda,
                                  "alarm time-out in seconds (lambda): a watcher raises an alarm when a "
                                  "tracked node has gone unseen this long");
    m["tau"] = sub->add_option("--tau", o->tau,
                               "presence-claim period in seconds (tau) for the heartbeat benchmark; "
                               "its detection cadence");
    m["delta"] = sub->add_option("--delta", o->delta,
                                 "answer window in seconds (delta): time the allegedly captured node "
                                 "has to prove presence before the network revokes it");
    m["gamma"] = sub->add_option("--gamma", o->gamma,
                                 "cooperation-request window in seconds (gamma): a token slot within "
                                 "gamma of its deadline asks the met peer for fresher evidence");
    m["sigma"] = sub->add_option("--sigma", o->sigma,
                                 "flood propagation delay in seconds (sigma) between emission and "
                                 "network-wide delivery");
    m["k_tracked"] = sub->add_option("--k-tracked", o->k_tracked,
                                     "watch-list capacity per node (K) for the time-out protocols; the "
                                     "token protocols book exactly one subject per node here (K_B=1, K_A=0)");
    m["sms_capacity"] = sub->add_option("--sms-capacity", o->sms_capacity,
                                        "short-memory store size: recently-met candidates kept for "
                                        "token exchanges and slot promotion");
    m["sms_refresh_interval"] = sub->add_option("--sms-refresh", o->sms_refresh,
                                                "seconds between short-memory refresh boundaries; one "
                                                "stale entry may be evicted per boundary");
    m["setup_duration"] = sub->add_option("--setup", o->setup,
                                          "bootstrap phase length in seconds; watch timers arm when it ends");
    m["max_exchanges"] = sub->add_option("--max-exchanges", o->max_exchanges,
                                         "token-negotiation cap: a node at the cap stops proposing exchanges");
    m["booking_assignment"] = sub->add_option("--assignment", o->assignment,
                                              "initial booking map: 'successor' or a comma list where "
                                              "entry i names the node watched by i");
    m["base_cooperation"] = sub->add_flag("--base-cooperation,!--no-base-cooperation", o->base_cooperation,
                                          "merge watch lists when trackers meet (time-out protocols)");
    m["strict_cap"] = sub->add_flag("--strict-cap,!--no-strict-cap", o->strict_cap,
                                    "exchange cap also blocks accepting proposals, not just making them");
    m["flip_exchange_rule"] = sub->add_flag("--flip-exchange-rule,!--no-flip-exchange-rule",
                                            o->flip_exchange_rule,
                                            "flip the acceptance comparison (sensitivity analysis)");
    m["adabo_admin_slot"] = sub->add_flag("--adabo-admin-slot,!--no-adabo-admin-slot", o->adabo_admin_slot,
                                          "administrator assigns one extra watcher per node covering the "
                                          "window where a node still holds its own token");
    m["benchmark_aligned"] = sub->add_flag("--benchmark-aligned,!--no-benchmark-aligned",
                                           o->benchmark_aligned,
                                           "align all heartbeat claims to multiples of tau instead of "
                                           "staggering them per node");
    m["capture"] = sub->add_option("--capture", o->capture,
                                   "inject a capture, format VICTIM@TIME (e.g. 7@100000); omit for a "
                                   "capture-free run (detection_time stays null)");
    m["measure_from"] = sub->add_option("--measure-from", o->measure_from,
                                        "ignore messages timestamped before this instant in the ledgers "
                                        "(warm-up cut, seconds)");
    sub->add_flag("--alarm-log", o->alarm_log, "include the per-alarm event log in the JSON output");
    sub->footer("All durations are integer seconds.");
    sub->callback([o] { run_simulate(*o); });
}

// ------------------------------------------------------------------ campaign

struct CampaignOpts {
    std::string spec;
    std::string trace;
    std::string out = "campaign-out";
    unsigned workers = 0;
    CLI::Option* o_trace = nullptr;
    CLI::Option* o_workers = nullptr;
};

void run_campaign_cmd(const CampaignOpts& o) {
    capsim::CampaignSpec spec = capsim::load_campaign_spec(o.spec);
    if (o.o_trace->count() > 0) spec.trace_path = o.trace;
    if (o.o_workers->count() > 0) spec.workers = o.workers;

    const ContactTrace trace = read_trace(spec.trace_path);
    describe_trace("trace " + spec.trace_path, trace);
    std::cerr << "sweep: " << spec.protocols.size() << " protocols x " << spec.lambdas.size()
              << " lambdas x " << (static_cast<std::uint64_t>(trace.n) * spec.grid_intervals)
              << " capture scenarios\n";

    const auto t0 = std::chrono::steady_clock::now();
    const capsim::CampaignResult result = capsim::run_campaign(spec, trace);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "ran " << result.rows.size() << " simulations in " << capsim::format_double(elapsed)
              << " s\n";
    for (const auto& err : result.errors) std::cerr << "run failed: " << err << '\n';

    capsim::export_campaign_all(result, o.out);
    std::cerr << "wrote " << o.out << "/summary.csv, campaign.json, per-protocol .dat, manifest.json\n";
    std::cout << capsim::manifest_json(result);
}

void add_campaign(CLI::App& app) {
    auto o = std::make_shared<CampaignOpts>();
    CLI::App* sub = app.add_subcommand(
        "campaign", "Run a sweep from a spec file; write summary.csv, campaign.json, plot data, "
        "and manifest.json into a directory");
    sub->add_option("--spec", o->spec,
                    "key=value spec file: trace, protocols, lambdas, grid_start, grid_step, "
                    "grid_intervals, measure_from, workers, plus every protocol knob the simulate "
                    "subcommand exposes (lambda, tau, delta, gamma, sigma, k_tracked, ...)")
        ->required();
    o->o_trace = sub->add_option("--trace", o->trace, "override the spec's trace path");
    o->o_workers = sub->add_option("--workers", o->workers,
                                   "override the spec's worker count; 0 means all available cores. "
                                   "Never changes the numbers, only the wall time");
    sub->add_option("-o,--out", o->out, "output directory (created if missing)")
        ->envname("CAPSIM_OUT_DIR")
        ->capture_default_str();
    sub->footer("The manifest (also printed to stdout) fingerprints the run: spec hash, trace hash, "
                "tool version. Re-running an identical spec rewrites identical bytes.");
    sub->callback([o] { run_campaign_cmd(*o); });
}

// -------------------------------------------------------------------- export

struct ExportOpts {
    std::string input;
    std::string format;
    std::string out = ".";
};

void run_export(const ExportOpts& o) {
    const capsim::CampaignResult result = capsim::campaign_from_json(slurp(o.input));

    capsim::ExportFormat format = capsim::ExportFormat::Csv;
    if (o.format == "csv") {
        format = capsim::ExportFormat::Csv;
    } else if (o.format == "json") {
        format = capsim::ExportFormat::Json;
    } else if (o.format == "plot-data") {
        format = capsim::ExportFormat::PlotData;
    } else {
        throw ConfigError("format: expected csv|json|plot-data, got '" + o.format + "'");
    }

    capsim::export_campaign(result, o.out, format);

    std::vector<std::string> written;
    switch (format) {
        case capsim::ExportFormat::Csv: written.push_back("summary.csv"); break;
        case capsim::ExportFormat::Json: written.push_back("campaign.json"); break;
        case capsim::ExportFormat::PlotData: {
            std::set<std::string> seen;
            for (const auto& agg : result.aggregates) {
                const std::string name = capsim::to_string(agg.protocol) + ".dat";
                if (seen.insert(name).second) written.push_back(name);
            }
            break;
        }
    }
    written.push_back("manifest.json");
    for (const auto& name : written) std::cout << o.out << '/' << name << '\n';
}

void add_export(CLI::App& app) {
    auto o = std::make_shared<ExportOpts>();
    CLI::App* sub = app.add_subcommand(
        "export", "Convert a saved campaign.json into csv, json, or plot-data files");
    sub->add_option("result", o->input, "campaign.json produced by the campaign subcommand")->required();
    sub->add_option("--format", o->format,
                    "csv (summary table) | json (full result) | plot-data (one "
                    "'mean_detection_s msgs_per_node_per_hour' series per protocol)")
        ->required()
        ->check(CLI::IsMember({"csv", "json", "plot-data"}));
    sub->add_option("-o,--out", o->out, "output directory (created if missing)")
        ->envname("CAPSIM_OUT_DIR")
        ->capture_default_str();
    sub->callback([o] { run_export(*o); });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"capsim: trace-driven simulator for node-capture detection protocols "
                 "on mobile contact traces"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(capsim::kToolVersion));
    app.footer("Exit codes: 0 success, 1 usage, 2 bad data or configuration, 3 runtime failure.");

    add_preprocess(app);
    add_stats(app);
    add_simulate(app);
    add_campaign(app);
    add_export(app);

    try {
        app.parse(argc, argv);
        return 0;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints help or the usage error
        return code == 0 ? 0 : 1;
    } catch (const capsim::TraceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const capsim::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
