#pragma once

#include <json.hpp>
#include <istream>
#include <ostream>
#include <vector>

#include "hvil/core.hpp"
#include "hvil/eval.hpp"
#include "hvil/hvil.hpp"
#include "hvil/oracle.hpp"
#include "hvil/rmel.hpp"
#include "hvil/synthetic.hpp"

namespace hvil {

using Json = nlohmann::json;

// Config structs read missing keys as their defaults.
void to_json(Json& j, const HvilConfig& c);
void from_json(const Json& j, HvilConfig& c);
void to_json(Json& j, const OraclePolicy& p);
void from_json(const Json& j, OraclePolicy& p);
void to_json(Json& j, const RmelConfig& c);
void from_json(const Json& j, RmelConfig& c);
void to_json(Json& j, const SyntheticSpec& s);
void from_json(const Json& j, SyntheticSpec& s);

void to_json(Json& j, const FeedbackEvent& e);
void from_json(const Json& j, FeedbackEvent& e);

Json summary_json(const RankingSummary& s);
Json effort_json(const EffortStats& s);
Json ranking_json(const RankedList& list, std::size_t top_k);

// Interaction logs as JSON lines: one feedback event per line, tagged with
// the probe's presentation time, window and round.
void write_event_log(std::ostream& out, const std::vector<ProbeLog>& logs);
std::vector<ProbeLog> read_event_log(std::istream& in);

}  // namespace hvil
