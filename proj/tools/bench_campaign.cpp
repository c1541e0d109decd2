// Times the campaign runner's serial reference path against the OpenMP
// fan-out on a synthetic community trace and cross-checks that both produce
// bit-identical results. Exits nonzero on any mismatch, so it doubles as a
// quick determinism smoke test at sizes the unit suite does not reach.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "capsim/experiment.hpp"
#include "support/synthetic.hpp"

namespace {

double time_once(const char* label,
                 const std::function<capsim::CampaignResult()>& body,
                 capsim::CampaignResult& out) {
    const auto t0 = std::chrono::steady_clock::now();
    out = body();
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "finished " << label << " in " << capsim::format_double(s) << " s\n";
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bench_campaign: serial reference vs OpenMP campaign runner"};
    std::uint32_t nodes = 16;
    capsim::Seconds duration = 60000;
    std::uint32_t intervals = 8;
    unsigned workers = std::thread::hardware_concurrency();
    std::string lambda_list = "1800,2700";
    app.add_option("--nodes", nodes, "synthetic trace size")->check(CLI::Range(2u, 200u));
    app.add_option("--duration", duration, "synthetic trace length in seconds");
    app.add_option("--intervals", intervals, "capture grid intervals");
    app.add_option("--workers", workers, "parallel worker count (0 = all cores)");
    app.add_option("--lambdas", lambda_list, "comma-separated sweep values in seconds");
    CLI11_PARSE(app, argc, argv);

    capsim::testing::SyntheticSpec shape;
    shape.n = nodes;
    shape.duration = duration;
    shape.communities = 3;
    shape.base_period = duration / 64;
    shape.sparse_nodes = 1;
    shape.seed = 11;
    const capsim::ContactTrace trace = capsim::testing::make_synthetic_trace(shape);

    capsim::CampaignSpec spec;
    spec.protocols = {capsim::ProtocolKind::Base, capsim::ProtocolKind::Booking,
                      capsim::ProtocolKind::AdaBo};
    for (const auto& token : capsim::split_list(lambda_list)) {
        spec.lambdas.push_back(std::stoll(token));
    }
    spec.grid_start = duration / 4;
    spec.grid_step = (duration / 2) / (intervals > 1 ? intervals - 1 : 1);
    spec.grid_intervals = intervals;
    spec.measure_from = duration / 8;
    spec.workers = workers;
    spec.knobs.gamma = std::min<capsim::Seconds>(600, spec.lambdas.front() / 3);
    spec.knobs.setup_duration = duration / 16;
    spec.knobs.sms_refresh_interval = duration / 10;
    spec.validate(trace);

    const std::uint64_t runs = static_cast<std::uint64_t>(spec.protocols.size()) *
                               spec.lambdas.size() * trace.n * intervals;
    std::cout << "campaign: " << spec.protocols.size() << " protocols x " << spec.lambdas.size()
              << " lambdas x " << (static_cast<std::uint64_t>(trace.n) * intervals)
              << " scenarios = " << runs << " runs (n=" << trace.n << ", duration=" << trace.duration
              << " s)\n";

    capsim::CampaignResult serial;
    capsim::CampaignResult parallel;
    const double t_serial =
        time_once("serial", [&] { return capsim::run_campaign_serial(spec, trace); }, serial);
    const double t_parallel =
        time_once("parallel", [&] { return capsim::run_campaign(spec, trace); }, parallel);

    std::cout << "  serial        " << capsim::format_double(t_serial) << " s\n";
    std::cout << "  parallel (" << (workers ? workers : std::thread::hardware_concurrency()) << ")  "
              << capsim::format_double(t_parallel) << " s";
    if (t_parallel > 0.0) {
        std::cout << "   speedup " << capsim::format_double(t_serial / t_parallel) << "x";
    }
    std::cout << '\n';

    const bool identical = serial == parallel;
    std::cout << "results bit-identical: " << (identical ? "yes" : "NO") << '\n';
    return identical ? 0 : 1;
}
