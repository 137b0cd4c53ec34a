#pragma once

#include <optional>
#include <string>
#include <vector>

#include "search.hpp"

namespace moar {

std::string trace_to_jsonl(const std::vector<Json>& records);
std::vector<Json> trace_from_jsonl(const std::string& text);

/// Frontier export: JSON array of {pipeline_key, cost, accuracy, path},
/// sorted by cost; and a CSV twin for plotting.
Json frontier_to_json(const RunResult& result);
std::string frontier_to_csv(const RunResult& result);

/// Recompute the frontier from a trace file's evaluation records.
Json frontier_from_trace(const std::string& jsonl_text);

/// Re-execute the run a trace records (stub instantiator, workers=1) and
/// compare traces record-by-record. Returns std::nullopt when the replay is
/// bit-identical, otherwise a description of the first mismatch.
std::optional<std::string> replay_trace(const std::string& jsonl_text);

}  // namespace moar
