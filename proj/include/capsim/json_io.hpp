#pragma once

#include <map>
#include <string>

#include "capsim/experiment.hpp"

namespace capsim {

// JSON (de)serialization lives here so the simulation core stays free of the
// dependency; only the experiment exporters and the CLI need it.

std::string campaign_json(const CampaignResult& result);
// Throws ConfigError on malformed or incomplete input.
CampaignResult campaign_from_json(const std::string& text);

// Run fingerprint: spec hash, trace hash, tool version, sizes. No timestamps —
// re-running an identical campaign must rewrite identical bytes.
std::string manifest_json(const CampaignResult& result);

std::string simulation_json(const SimulationResult& result, bool include_alarm_log);

// Sidecar written next to a preprocessed trace: node count, duration, and the
// original-id -> dense-id relabeling applied by node removal.
std::string trace_sidecar_json(const ContactTrace& trace,
                               const std::map<NodeId, NodeId>& relabel);

}  // namespace capsim
