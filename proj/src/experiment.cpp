#include "capsim/experiment.hpp"

#include <array>
#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "capsim/config.hpp"
#include "capsim/json_io.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace capsim {

namespace {

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ",";
        out += items[i];
    }
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write output file: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ConfigError("short write to output file: " + path.string());
}

// One simulation per task; tasks enumerate (protocol, lambda, scenario) in
// spec order, so a task's position is also its row index.
struct RunTask {
    ProtocolKind protocol = ProtocolKind::Base;
    Seconds lambda = 0;
    CaptureScenario scenario;
};

ProtocolConfig config_for(const CampaignSpec& spec, ProtocolKind protocol, Seconds lambda) {
    ProtocolConfig cfg = spec.knobs;
    cfg.kind = protocol;
    cfg.lambda = lambda;
    // the heartbeat benchmark has no mobility time-out; the sweep drives its
    // claim period instead so all protocols share one x-axis
    if (protocol == ProtocolKind::Benchmark) cfg.tau = lambda;
    return cfg;
}

RunRow execute(const RunTask& task, const CampaignSpec& spec, const ContactTrace& trace) {
    RunRow row;
    row.protocol = task.protocol;
    row.lambda = task.lambda;
    row.scenario = task.scenario;
    try {
        const SimulationResult r =
            run_simulation(trace, config_for(spec, task.protocol, task.lambda), task.scenario,
                           spec.measure_from);
        row.detection_time = r.detection_time;
        row.false_negative = r.false_negative;
        row.false_positives = r.false_positive_count;
        row.messages = r.ledger.total_sent();
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    return row;
}

CampaignResult run_impl(const CampaignSpec& spec, const ContactTrace& trace, bool parallel) {
    trace.validate();
    spec.validate(trace);

    const auto grid =
        build_capture_grid(trace.n, spec.grid_start, spec.grid_step, spec.grid_intervals);
    std::vector<RunTask> tasks;
    tasks.reserve(spec.protocols.size() * spec.lambdas.size() * grid.size());
    for (ProtocolKind p : spec.protocols) {
        for (Seconds lambda : spec.lambdas) {
            for (const CaptureScenario& sc : grid) tasks.push_back({p, lambda, sc});
        }
    }

    std::vector<RunRow> rows(tasks.size());
    int threads = 1;
#if defined(_OPENMP)
    threads = spec.workers == 0 ? omp_get_max_threads() : static_cast<int>(spec.workers);
#pragma omp parallel for schedule(dynamic) num_threads(threads) if (parallel && threads > 1)
#endif
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(tasks.size()); ++i) {
        rows[static_cast<std::size_t>(i)] =
            execute(tasks[static_cast<std::size_t>(i)], spec, trace);
    }
    (void)threads;
    (void)parallel;

    CampaignResult result;
    result.n = trace.n;
    result.trace_duration = trace.duration;
    result.measure_from = spec.measure_from;
    result.trace_hash = hex64(fnv1a64(serialize_contact_trace(trace)));
    result.spec_hash = hex64(fnv1a64(render_campaign_spec(spec)));
    result.rows = std::move(rows);

    // integer-sum aggregation in task order: independent of completion order
    const std::size_t per_agg = grid.size();
    std::size_t idx = 0;
    for (ProtocolKind p : spec.protocols) {
        for (Seconds lambda : spec.lambdas) {
            AggregateRow agg;
            agg.protocol = p;
            agg.lambda = lambda;
            for (std::size_t s = 0; s < per_agg; ++s, ++idx) {
                const RunRow& row = result.rows[idx];
                if (!row.error.empty()) {
                    result.errors.push_back(to_string(row.protocol) +
                                            " lambda=" + std::to_string(row.lambda) + " capture " +
                                            std::to_string(row.scenario.victim) + "@" +
                                            std::to_string(row.scenario.capture_time) + ": " +
                                            row.error);
                    continue;
                }
                ++agg.runs;
                if (row.detection_time) {
                    ++agg.detected;
                    agg.detection_sum += *row.detection_time;
                }
                if (row.false_negative) ++agg.false_negatives;
                agg.false_positives += row.false_positives;
                agg.messages += row.messages;
            }
            result.aggregates.push_back(agg);
        }
    }
    return result;
}

}  // namespace

void CampaignSpec::validate(const ContactTrace& trace) const {
    if (protocols.empty()) throw ConfigError("campaign needs at least one protocol");
    if (lambdas.empty()) throw ConfigError("campaign needs at least one lambda value");
    if (grid_intervals < 1) throw ConfigError("grid_intervals must be at least 1");
    if (grid_start < 0) throw ConfigError("grid_start must be non-negative");
    if (grid_step < 0) throw ConfigError("grid_step must be non-negative");
    const Seconds last =
        grid_start + static_cast<Seconds>(grid_intervals - 1) * grid_step;
    if (last > trace.duration) {
        throw ConfigError("capture grid ends at " + std::to_string(last) +
                          " but the trace lasts " + std::to_string(trace.duration));
    }
    if (measure_from < 0 || measure_from >= trace.duration) {
        throw ConfigError("measure_from must leave a non-empty measured window");
    }
    for (ProtocolKind p : protocols) {
        for (Seconds lambda : lambdas) {
            ProtocolConfig cfg = knobs;
            cfg.kind = p;
            cfg.lambda = lambda;
            if (p == ProtocolKind::Benchmark) cfg.tau = lambda;
            cfg.validate(trace.n);
        }
    }
}

CampaignSpec campaign_spec_from_keys(const std::map<std::string, std::string>& kv) {
    CampaignSpec spec;
    apply_protocol_keys(spec.knobs, kv);
    spec.trace_path = config_string(kv, "trace", "");
    if (auto it = kv.find("protocols"); it != kv.end()) {
        spec.protocols.clear();
        for (const std::string& name : split_list(it->second)) {
            spec.protocols.push_back(protocol_kind_from_string(name));
        }
    } else {
        spec.protocols = {ProtocolKind::Benchmark, ProtocolKind::Base, ProtocolKind::Booking,
                          ProtocolKind::Adaptive, ProtocolKind::AdaBo};
    }
    if (auto it = kv.find("lambdas"); it != kv.end()) {
        for (const std::string& item : split_list(it->second)) {
            std::int64_t v = 0;
            auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
            if (ec != std::errc{} || p != item.data() + item.size()) {
                throw ConfigError("lambdas: expected integer, got '" + item + "'");
            }
            spec.lambdas.push_back(v);
        }
    }
    spec.grid_start = config_int(kv, "grid_start", spec.grid_start);
    spec.grid_step = config_int(kv, "grid_step", spec.grid_step);
    spec.grid_intervals =
        static_cast<std::uint32_t>(config_int(kv, "grid_intervals", spec.grid_intervals));
    spec.measure_from = config_int(kv, "measure_from", spec.measure_from);
    spec.workers = static_cast<unsigned>(config_int(kv, "workers", spec.workers));
    return spec;
}

CampaignSpec load_campaign_spec(const std::string& path) {
    return campaign_spec_from_keys(parse_key_value_file(path));
}

std::string render_campaign_spec(const CampaignSpec& spec) {
    std::vector<std::string> protocols;
    protocols.reserve(spec.protocols.size());
    for (ProtocolKind p : spec.protocols) protocols.push_back(to_string(p));
    std::vector<std::string> lambdas;
    lambdas.reserve(spec.lambdas.size());
    for (Seconds v : spec.lambdas) lambdas.push_back(std::to_string(v));

    const ProtocolConfig& k = spec.knobs;
    std::string assignment = "successor";
    if (!k.booking_assignment.empty()) {
        std::vector<std::string> ids;
        ids.reserve(k.booking_assignment.size());
        for (NodeId id : k.booking_assignment) ids.push_back(std::to_string(id));
        assignment = join(ids);
    }
    std::string out;
    out += "protocols = " + join(protocols) + "\n";
    out += "lambdas = " + join(lambdas) + "\n";
    out += "grid_start = " + std::to_string(spec.grid_start) + "\n";
    out += "grid_step = " + std::to_string(spec.grid_step) + "\n";
    out += "grid_intervals = " + std::to_string(spec.grid_intervals) + "\n";
    out += "measure_from = " + std::to_string(spec.measure_from) + "\n";
    out += "tau = " + std::to_string(k.tau) + "\n";
    out += "delta = " + std::to_string(k.delta) + "\n";
    out += "gamma = " + std::to_string(k.gamma) + "\n";
    out += "sigma = " + std::to_string(k.sigma) + "\n";
    out += "k_tracked = " + std::to_string(k.k_tracked) + "\n";
    out += "sms_capacity = " + std::to_string(k.sms_capacity) + "\n";
    out += "sms_refresh_interval = " + std::to_string(k.sms_refresh_interval) + "\n";
    out += "setup_duration = " + std::to_string(k.setup_duration) + "\n";
    out += "max_exchanges = " + std::to_string(k.max_exchanges) + "\n";
    out += std::string("base_cooperation = ") + (k.base_cooperation ? "1" : "0") + "\n";
    out += std::string("strict_cap = ") + (k.strict_cap ? "1" : "0") + "\n";
    out += std::string("flip_exchange_rule = ") + (k.flip_exchange_rule ? "1" : "0") + "\n";
    out += std::string("adabo_admin_slot = ") + (k.adabo_admin_slot ? "1" : "0") + "\n";
    out += std::string("benchmark_aligned = ") + (k.benchmark_aligned ? "1" : "0") + "\n";
    out += "booking_assignment = " + assignment + "\n";
    return out;
}

std::vector<CaptureScenario> build_capture_grid(std::uint32_t n, Seconds start, Seconds step,
                                                std::uint32_t intervals) {
    if (n == 0) throw ConfigError("capture grid needs at least one node");
    if (intervals == 0) throw ConfigError("capture grid needs at least one interval");
    std::vector<CaptureScenario> grid;
    grid.reserve(static_cast<std::size_t>(n) * intervals);
    for (std::uint32_t i = 0; i < intervals; ++i) {
        const Seconds time = start + static_cast<Seconds>(i) * step;
        for (NodeId v = 0; v < n; ++v) grid.push_back({v, time});
    }
    return grid;
}

double AggregateRow::mean_detection_s() const {
    return detected == 0 ? 0.0 : static_cast<double>(detection_sum) / static_cast<double>(detected);
}

double AggregateRow::fn_rate() const {
    return runs == 0 ? 0.0 : static_cast<double>(false_negatives) / static_cast<double>(runs);
}

double CampaignResult::window_hours() const {
    return static_cast<double>(trace_duration - measure_from) / 3600.0;
}

double CampaignResult::msgs_per_node_per_hour(const AggregateRow& agg) const {
    if (agg.runs == 0 || n == 0 || trace_duration <= measure_from) return 0.0;
    const double per_run = static_cast<double>(agg.messages) / static_cast<double>(agg.runs);
    return per_run / static_cast<double>(n) / window_hours();
}

CampaignResult run_campaign(const CampaignSpec& spec) {
    return run_campaign(spec, parse_contact_trace_file(spec.trace_path));
}

CampaignResult run_campaign(const CampaignSpec& spec, const ContactTrace& trace) {
    return run_impl(spec, trace, true);
}

CampaignResult run_campaign_serial(const CampaignSpec& spec, const ContactTrace& trace) {
    return run_impl(spec, trace, false);
}

std::string summary_csv(const CampaignResult& result) {
    std::string out = "protocol,lambda,mean_detection_s,msgs_per_node_per_hour,fn_rate,runs\n";
    for (const AggregateRow& agg : result.aggregates) {
        out += to_string(agg.protocol) + "," + std::to_string(agg.lambda) + "," +
               format_double(agg.mean_detection_s()) + "," +
               format_double(result.msgs_per_node_per_hour(agg)) + "," +
               format_double(agg.fn_rate()) + "," + std::to_string(agg.runs) + "\n";
    }
    return out;
}

namespace {

std::string plot_series(const CampaignResult& result, ProtocolKind protocol) {
    std::string out = "# mean_detection_s msgs_per_node_per_hour\n";
    for (const AggregateRow& agg : result.aggregates) {
        if (agg.protocol != protocol) continue;
        out += format_double(agg.mean_detection_s()) + " " +
               format_double(result.msgs_per_node_per_hour(agg)) + "\n";
    }
    return out;
}

void export_plot_data(const CampaignResult& result, const std::filesystem::path& dir) {
    std::vector<ProtocolKind> seen;
    for (const AggregateRow& agg : result.aggregates) {
        bool is_new = true;
        for (ProtocolKind p : seen) is_new = is_new && p != agg.protocol;
        if (!is_new) continue;
        seen.push_back(agg.protocol);
        write_file(dir / (to_string(agg.protocol) + ".dat"), plot_series(result, agg.protocol));
    }
}

}  // namespace

void export_campaign(const CampaignResult& result, const std::string& out_dir,
                     ExportFormat format) {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    switch (format) {
        case ExportFormat::Csv:
            write_file(dir / "summary.csv", summary_csv(result));
            break;
        case ExportFormat::Json:
            write_file(dir / "campaign.json", campaign_json(result));
            break;
        case ExportFormat::PlotData:
            export_plot_data(result, dir);
            break;
    }
    write_file(dir / "manifest.json", manifest_json(result));
}

void export_campaign_all(const CampaignResult& result, const std::string& out_dir) {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    write_file(dir / "summary.csv", summary_csv(result));
    write_file(dir / "campaign.json", campaign_json(result));
    export_plot_data(result, dir);
    write_file(dir / "manifest.json", manifest_json(result));
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

std::string format_double(double value) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc{}) throw std::runtime_error("double formatting failed");
    return std::string(buf.data(), end);
}

}  // namespace capsim
