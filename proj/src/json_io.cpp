#include "capsim/json_io.hpp"

#include <json.hpp>

#include "capsim/config.hpp"

namespace capsim {

namespace {

using nlohmann::json;

json aggregate_to_json(const AggregateRow& agg) {
    return json{{"protocol", to_string(agg.protocol)},
                {"lambda", agg.lambda},
                {"runs", agg.runs},
                {"detected", agg.detected},
                {"detection_sum", agg.detection_sum},
                {"false_negatives", agg.false_negatives},
                {"false_positives", agg.false_positives},
                {"messages", agg.messages}};
}

AggregateRow aggregate_from_json(const json& j) {
    AggregateRow agg;
    agg.protocol = protocol_kind_from_string(j.at("protocol").get<std::string>());
    agg.lambda = j.at("lambda").get<Seconds>();
    agg.runs = j.at("runs").get<std::int64_t>();
    agg.detected = j.at("detected").get<std::int64_t>();
    agg.detection_sum = j.at("detection_sum").get<std::int64_t>();
    agg.false_negatives = j.at("false_negatives").get<std::int64_t>();
    agg.false_positives = j.at("false_positives").get<std::int64_t>();
    agg.messages = j.at("messages").get<std::int64_t>();
    return agg;
}

json row_to_json(const RunRow& row) {
    json j{{"protocol", to_string(row.protocol)},
           {"lambda", row.lambda},
           {"victim", row.scenario.victim},
           {"capture_time", row.scenario.capture_time},
           {"false_negative", row.false_negative},
           {"false_positives", row.false_positives},
           {"messages", row.messages},
           {"error", row.error}};
    if (row.detection_time) {
        j["detection_time"] = *row.detection_time;
    } else {
        j["detection_time"] = nullptr;
    }
    return j;
}

RunRow row_from_json(const json& j) {
    RunRow row;
    row.protocol = protocol_kind_from_string(j.at("protocol").get<std::string>());
    row.lambda = j.at("lambda").get<Seconds>();
    row.scenario.victim = j.at("victim").get<NodeId>();
    row.scenario.capture_time = j.at("capture_time").get<Seconds>();
    if (!j.at("detection_time").is_null()) {
        row.detection_time = j.at("detection_time").get<Seconds>();
    }
    row.false_negative = j.at("false_negative").get<bool>();
    row.false_positives = j.at("false_positives").get<std::int64_t>();
    row.messages = j.at("messages").get<std::int64_t>();
    row.error = j.at("error").get<std::string>();
    return row;
}

}  // namespace

std::string campaign_json(const CampaignResult& result) {
    json j;
    j["n"] = result.n;
    j["trace_duration"] = result.trace_duration;
    j["measure_from"] = result.measure_from;
    j["trace_hash"] = result.trace_hash;
    j["spec_hash"] = result.spec_hash;
    j["aggregates"] = json::array();
    for (const AggregateRow& agg : result.aggregates) {
        j["aggregates"].push_back(aggregate_to_json(agg));
    }
    j["rows"] = json::array();
    for (const RunRow& row : result.rows) j["rows"].push_back(row_to_json(row));
    j["errors"] = result.errors;
    return j.dump(2) + "\n";
}

CampaignResult campaign_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        CampaignResult result;
        result.n = j.at("n").get<std::uint32_t>();
        result.trace_duration = j.at("trace_duration").get<Seconds>();
        result.measure_from = j.at("measure_from").get<Seconds>();
        result.trace_hash = j.at("trace_hash").get<std::string>();
        result.spec_hash = j.at("spec_hash").get<std::string>();
        for (const json& a : j.at("aggregates")) result.aggregates.push_back(aggregate_from_json(a));
        for (const json& r : j.at("rows")) result.rows.push_back(row_from_json(r));
        result.errors = j.at("errors").get<std::vector<std::string>>();
        return result;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed campaign json: ") + e.what());
    }
}

std::string manifest_json(const CampaignResult& result) {
    json j;
    j["tool_version"] = std::string(kToolVersion);
    j["spec_hash"] = result.spec_hash;
    j["trace_hash"] = result.trace_hash;
    j["n"] = result.n;
    j["trace_duration"] = result.trace_duration;
    j["measure_from"] = result.measure_from;
    j["aggregate_count"] = result.aggregates.size();
    j["run_count"] = result.rows.size();
    j["error_count"] = result.errors.size();
    return j.dump(2) + "\n";
}

std::string simulation_json(const SimulationResult& result, bool include_alarm_log) {
    json j;
    auto opt = [](const std::optional<Seconds>& v) {
        return v ? json(*v) : json(nullptr);
    };
    j["detection_time"] = opt(result.detection_time);
    j["alarm_time"] = opt(result.alarm_time);
    j["revocation_time"] = opt(result.revocation_time);
    j["false_negative"] = result.false_negative;
    j["false_positive_count"] = result.false_positive_count;
    json msgs;
    msgs["total_sent"] = result.ledger.total_sent();
    msgs["total_received"] = result.ledger.total_received();
    msgs["sent_by_class"] = {{"alarm", result.ledger.sent_by_class[0]},
                             {"claim", result.ledger.sent_by_class[1]},
                             {"exchange", result.ledger.sent_by_class[2]},
                             {"cooperation", result.ledger.sent_by_class[3]}};
    msgs["per_node_sent"] = result.ledger.sent;
    msgs["per_node_received"] = result.ledger.received;
    j["messages"] = msgs;
    if (include_alarm_log) {
        json log = json::array();
        for (const AlarmLogEntry& e : result.alarm_log) {
            log.push_back(json{{"time", e.time},
                               {"watcher", e.watcher},
                               {"subject", e.subject},
                               {"answered", e.answered}});
        }
        j["alarm_log"] = log;
    }
    return j.dump(2) + "\n";
}

std::string trace_sidecar_json(const ContactTrace& trace,
                               const std::map<NodeId, NodeId>& relabel) {
    json j;
    j["n"] = trace.n;
    j["duration"] = trace.duration;
    j["events"] = trace.events.size();
    json map = json::array();
    for (const auto& [original, dense] : relabel) {
        map.push_back(json::array({original, dense}));
    }
    j["relabel"] = map;
    return j.dump(2) + "\n";
}

}  // namespace capsim
