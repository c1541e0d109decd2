#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "capsim/engine.hpp"

namespace capsim {

inline constexpr std::string_view kToolVersion = "capsim 1.0.0";

// One parameter sweep: every protocol crossed with every lambda, each pair
// replayed once per capture scenario on the shared grid. `knobs` carries the
// parameters common to all runs; kind and lambda are overridden per run (for
// the heartbeat benchmark the sweep value drives tau, its only cadence knob).
struct CampaignSpec {
    std::string trace_path;
    std::vector<ProtocolKind> protocols;
    std::vector<Seconds> lambdas;
    Seconds grid_start = 0;
    Seconds grid_step = 1;
    std::uint32_t grid_intervals = 1;
    Seconds measure_from = 0;
    unsigned workers = 0;  // 0 = all available; never affects results
    ProtocolConfig knobs;

    // Throws ConfigError when the sweep is empty, the grid does not fit the
    // trace, the measured window is empty, or any (protocol, lambda)
    // combination fails protocol validation.
    void validate(const ContactTrace& trace) const;

    friend bool operator==(const CampaignSpec&, const CampaignSpec&) = default;
};

// Flat key=value file (same format the protocol keys use). Campaign keys:
// trace, protocols, lambdas, grid_start, grid_step, grid_intervals,
// measure_from, workers. Everything else is applied to `knobs`.
CampaignSpec load_campaign_spec(const std::string& path);
CampaignSpec campaign_spec_from_keys(const std::map<std::string, std::string>& kv);

// Canonical text rendering of everything that shapes the results (workers and
// the trace path are execution details and excluded). Feeds the spec hash.
std::string render_campaign_spec(const CampaignSpec& spec);

// {(victim v, time start + i*step) : i in [0, intervals), v in [0, n)},
// ordered by (i, v). Throws ConfigError when n or intervals is zero.
std::vector<CaptureScenario> build_capture_grid(std::uint32_t n, Seconds start, Seconds step,
                                                std::uint32_t intervals);

struct RunRow {
    ProtocolKind protocol = ProtocolKind::Base;
    Seconds lambda = 0;
    CaptureScenario scenario;
    std::optional<Seconds> detection_time;
    bool false_negative = false;
    std::int64_t false_positives = 0;
    std::int64_t messages = 0;  // ledger total sent within the measured window
    std::string error;          // nonempty when the run threw; row excluded from aggregates

    friend bool operator==(const RunRow&, const RunRow&) = default;
};

// Integer sums only; the derived means are computed on demand so aggregation
// is exact and independent of worker count and completion order.
struct AggregateRow {
    ProtocolKind protocol = ProtocolKind::Base;
    Seconds lambda = 0;
    std::int64_t runs = 0;      // successful runs aggregated
    std::int64_t detected = 0;  // runs whose capture was detected
    std::int64_t detection_sum = 0;
    std::int64_t false_negatives = 0;
    std::int64_t false_positives = 0;
    std::int64_t messages = 0;

    double mean_detection_s() const;  // 0 when nothing was detected
    double fn_rate() const;           // 0 when runs == 0

    friend bool operator==(const AggregateRow&, const AggregateRow&) = default;
};

struct CampaignResult {
    std::uint32_t n = 0;
    Seconds trace_duration = 0;
    Seconds measure_from = 0;
    std::string trace_hash;  // FNV-1a over the canonical trace serialization
    std::string spec_hash;   // FNV-1a over render_campaign_spec
    std::vector<AggregateRow> aggregates;  // (protocol, lambda) in spec order
    std::vector<RunRow> rows;              // (protocol, lambda, scenario) order
    std::vector<std::string> errors;       // per-run failures, identified

    double window_hours() const;
    double msgs_per_node_per_hour(const AggregateRow& agg) const;

    friend bool operator==(const CampaignResult&, const CampaignResult&) = default;
};

// Runs every (protocol, lambda, scenario) simulation. The first form loads the
// trace from spec.trace_path. Runs are independent and fan out across OpenMP
// workers; the serial variant executes the identical task list on one thread
// and must produce a bit-identical CampaignResult (cross-checked in tests and
// by the benchmark tool).
CampaignResult run_campaign(const CampaignSpec& spec);
CampaignResult run_campaign(const CampaignSpec& spec, const ContactTrace& trace);
CampaignResult run_campaign_serial(const CampaignSpec& spec, const ContactTrace& trace);

enum class ExportFormat { Csv, Json, PlotData };

// Writes into out_dir (created if missing) plus manifest.json alongside:
//   Csv      -> summary.csv   (protocol,lambda,mean_detection_s,msgs_per_node_per_hour,fn_rate,runs)
//   Json     -> campaign.json (full result, re-importable)
//   PlotData -> <protocol>.dat, one series per protocol: "mean_detection_s msgs_per_node_per_hour"
void export_campaign(const CampaignResult& result, const std::string& out_dir, ExportFormat format);
// All three formats in one directory; what the campaign subcommand emits.
void export_campaign_all(const CampaignResult& result, const std::string& out_dir);

std::string summary_csv(const CampaignResult& result);

// 64-bit FNV-1a, rendered as 16 hex digits.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

// Shortest round-trip decimal rendering (std::to_chars), locale-independent.
std::string format_double(double value);

}  // namespace capsim
