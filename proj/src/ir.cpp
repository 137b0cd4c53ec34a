#include "ir.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <sstream>

#include "errors.hpp"
#include "util.hpp"

namespace moar {

bool is_llm(OperatorType t) {
  switch (t) {
    case OperatorType::Map:
    case OperatorType::ParallelMap:
    case OperatorType::Reduce:
    case OperatorType::Filter:
    case OperatorType::Extract:
      return true;
    default:
      return false;
  }
}

bool is_code(OperatorType t) {
  return t == OperatorType::CodeMap || t == OperatorType::CodeReduce ||
         t == OperatorType::CodeFilter;
}

bool is_auxiliary(OperatorType t) {
  return t == OperatorType::Split || t == OperatorType::Gather ||
         t == OperatorType::Unnest || t == OperatorType::Sample;
}

const char* to_string(OperatorType t) {
  switch (t) {
    case OperatorType::Map: return "map";
    case OperatorType::ParallelMap: return "parallel_map";
    case OperatorType::Reduce: return "reduce";
    case OperatorType::Filter: return "filter";
    case OperatorType::Split: return "split";
    case OperatorType::Gather: return "gather";
    case OperatorType::Unnest: return "unnest";
    case OperatorType::Sample: return "sample";
    case OperatorType::Extract: return "extract";
    case OperatorType::CodeMap: return "code_map";
    case OperatorType::CodeReduce: return "code_reduce";
    case OperatorType::CodeFilter: return "code_filter";
  }
  return "?";
}

OperatorType operator_type_from_string(const std::string& s) {
  static const std::map<std::string, OperatorType> table = {
      {"map", OperatorType::Map},
      {"parallel_map", OperatorType::ParallelMap},
      {"reduce", OperatorType::Reduce},
      {"filter", OperatorType::Filter},
      {"split", OperatorType::Split},
      {"gather", OperatorType::Gather},
      {"unnest", OperatorType::Unnest},
      {"sample", OperatorType::Sample},
      {"extract", OperatorType::Extract},
      {"code_map", OperatorType::CodeMap},
      {"code_reduce", OperatorType::CodeReduce},
      {"code_filter", OperatorType::CodeFilter},
  };
  auto it = table.find(s);
  if (it == table.end()) fail(ErrorKind::Parse, "unknown operator type: " + s);
  return it->second;
}

const char* to_string(SampleMethod m) {
  switch (m) {
    case SampleMethod::Random: return "random";
    case SampleMethod::Bm25: return "bm25";
    case SampleMethod::Embedding: return "embedding";
    case SampleMethod::Stratified: return "stratified";
  }
  return "?";
}

SampleMethod sample_method_from_string(const std::string& s) {
  if (s == "random") return SampleMethod::Random;
  if (s == "bm25") return SampleMethod::Bm25;
  if (s == "embedding") return SampleMethod::Embedding;
  if (s == "stratified") return SampleMethod::Stratified;
  fail(ErrorKind::Parse, "unknown sampling method: " + s);
}

// ---------------------------------------------------------------------------
// ValueType
// ---------------------------------------------------------------------------

namespace {

std::string trim(std::string s) {
  size_t a = s.find_first_not_of(" \t");
  size_t b = s.find_last_not_of(" \t");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

}  // namespace

ValueType ValueType::parse(const std::string& text) {
  std::string t = trim(text);
  if (t == "string" || t == "str") return {ValueKind::String, {}};
  if (t == "number" || t == "num" || t == "float" || t == "int")
    return {ValueKind::Number, {}};
  if (t == "boolean" || t == "bool") return {ValueKind::Boolean, {}};
  if (t == "list[string]" || t == "list[str]") return {ValueKind::ListString, {}};
  // list[{a, b}] or list[{a: str, b: str}]
  if (t.rfind("list[{", 0) == 0 && t.size() > 7 && t.substr(t.size() - 2) == "}]") {
    std::string inner = t.substr(6, t.size() - 8);
    std::vector<std::string> fields;
    for (auto& field : split_csv(inner)) {
      std::string name = field;
      size_t colon = name.find(':');
      if (colon != std::string::npos) {
        std::string type = trim(name.substr(colon + 1));
        if (type != "str" && type != "string")
          fail(ErrorKind::Parse, "list-of-object fields must be strings: " + field);
        name = name.substr(0, colon);
      }
      name = trim(name);
      if (name.empty()) fail(ErrorKind::Parse, "empty object field in: " + text);
      fields.push_back(name);
    }
    if (fields.empty()) fail(ErrorKind::Parse, "empty object schema in: " + text);
    std::sort(fields.begin(), fields.end());
    fields.erase(std::unique(fields.begin(), fields.end()), fields.end());
    return {ValueKind::ListObject, std::move(fields)};
  }
  fail(ErrorKind::Parse, "unknown schema type: " + text);
}

std::string ValueType::to_string() const {
  switch (kind) {
    case ValueKind::String: return "string";
    case ValueKind::Number: return "number";
    case ValueKind::Boolean: return "boolean";
    case ValueKind::ListString: return "list[string]";
    case ValueKind::ListObject: return "list[{" + join(object_fields, ", ") + "}]";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// OperatorConfig helpers
// ---------------------------------------------------------------------------

Schema OperatorConfig::effective_schema() const {
  if (type != OperatorType::ParallelMap) return output_schema;
  Schema merged = output_schema;
  for (const auto& b : branches)
    for (const auto& [k, v] : b.output_schema) merged.emplace(k, v);
  return merged;
}

std::vector<std::string> OperatorConfig::referenced_keys() const {
  std::vector<std::string> keys = prompt_placeholders(prompt);
  for (const auto& b : branches) {
    for (auto& k : prompt_placeholders(b.prompt)) {
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    }
  }
  return keys;
}

std::vector<std::string> prompt_placeholders(const std::string& prompt) {
  std::vector<std::string> out;
  size_t pos = 0;
  while ((pos = prompt.find("{{", pos)) != std::string::npos) {
    size_t end = prompt.find("}}", pos + 2);
    if (end == std::string::npos) break;
    std::string inner = trim(prompt.substr(pos + 2, end - pos - 2));
    pos = end + 2;
    if (inner.rfind("input.", 0) != 0) continue;
    std::string key = inner.substr(6);
    if (key.empty()) continue;
    if (std::find(out.begin(), out.end(), key) == out.end()) out.push_back(key);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model catalog
// ---------------------------------------------------------------------------

const ModelInfo* ModelCatalog::find(const std::string& model_id) const {
  for (const auto& e : entries)
    if (e.model_id == model_id) return &e;
  return nullptr;
}

void ModelCatalog::check() const {
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (!ids.insert(e.model_id).second)
      fail(ErrorKind::Validation, "duplicate model id: " + e.model_id);
    if (e.input_price_per_token < 0 || e.output_price_per_token < 0)
      fail(ErrorKind::Validation, "negative price for model: " + e.model_id);
    if (e.context_window_tokens <= 0)
      fail(ErrorKind::Validation, "non-positive context window for model: " + e.model_id);
    if (e.family.empty())
      fail(ErrorKind::Validation, "empty family for model: " + e.model_id);
  }
}

// ---------------------------------------------------------------------------
// Schema threading
// ---------------------------------------------------------------------------

namespace {

std::string extras_or(const OperatorConfig& op, const std::string& key,
                      const std::string& fallback) {
  auto it = op.extras.find(key);
  return it == op.extras.end() ? fallback : it->second;
}

void thread_keys(const OperatorConfig& op, std::set<std::string>& keys) {
  switch (op.type) {
    case OperatorType::Map:
    case OperatorType::ParallelMap:
    case OperatorType::Extract:
    case OperatorType::CodeMap:
      for (const auto& [k, v] : op.effective_schema()) keys.insert(k);
      break;
    case OperatorType::Reduce:
    case OperatorType::CodeReduce: {
      std::set<std::string> next(op.group_by.begin(), op.group_by.end());
      for (const auto& [k, v] : op.output_schema) next.insert(k);
      keys = std::move(next);
      break;
    }
    case OperatorType::Split: {
      std::string split_key = extras_or(op, "split_key", "");
      keys.erase(split_key);
      keys.insert(extras_or(op, "chunk_key_out", split_key + "_chunk"));
      break;
    }
    case OperatorType::Filter:
    case OperatorType::CodeFilter:
    case OperatorType::Gather:
    case OperatorType::Unnest:
    case OperatorType::Sample:
      break;  // restructuring only; key set unchanged
  }
}

}  // namespace

std::set<std::string> available_keys_after(const PipelineSpec& p, size_t i) {
  if (i > p.operators.size())
    fail(ErrorKind::IndexOutOfRange,
         "operator index " + std::to_string(i) + " out of range");
  std::set<std::string> keys = p.input_keys;
  for (size_t j = 0; j < i; ++j) thread_keys(p.operators[j], keys);
  return keys;
}

// ---------------------------------------------------------------------------
// validate_pipeline
// ---------------------------------------------------------------------------

namespace {

void check_class(const OperatorConfig& op, std::vector<ValidationIssue>& out) {
  auto issue = [&](const std::string& rule, const std::string& detail) {
    out.push_back({op.id, rule, detail});
  };
  const bool llm = is_llm(op.type);
  const bool code = is_code(op.type);
  if (llm) {
    if (op.type == OperatorType::ParallelMap) {
      if (op.branches.empty()) issue("missing_prompt", "parallel_map needs branches");
      if (!op.prompt.empty())
        issue("unexpected_prompt", "parallel_map carries prompts in branches");
      for (size_t i = 0; i < op.branches.size(); ++i) {
        if (op.branches[i].prompt.empty())
          issue("missing_prompt", "branch " + std::to_string(i) + " has no prompt");
        if (op.branches[i].output_schema.empty())
          issue("empty_schema", "branch " + std::to_string(i) + " has no output schema");
      }
    } else if (op.prompt.empty()) {
      issue("missing_prompt", "LLM operator needs a prompt template");
    }
    if (!op.code_body.empty()) issue("unexpected_code", "LLM operator has a code body");
    if (!op.model.has_value() || op.model->empty())
      issue("missing_model", "LLM operator needs a model");
  } else {
    if (!op.prompt.empty()) issue("unexpected_prompt", "non-LLM operator has a prompt");
    if (!op.branches.empty()) issue("unexpected_prompt", "non-LLM operator has branches");
    if (op.model.has_value()) issue("unexpected_model", "non-LLM operator carries a model");
    if (code && op.code_body.empty()) issue("missing_code", "code operator needs a code body");
    if (!code && !op.code_body.empty())
      issue("unexpected_code", "auxiliary operator has a code body");
  }
}

void check_schema_shape(const OperatorConfig& op, std::vector<ValidationIssue>& out) {
  auto issue = [&](const std::string& rule, const std::string& detail) {
    out.push_back({op.id, rule, detail});
  };
  for (const auto& [k, v] : op.effective_schema()) {
    if (k.empty() || k.find(' ') != std::string::npos)
      issue("invalid_key", "schema key '" + k + "'");
  }
  switch (op.type) {
    case OperatorType::Map:
    case OperatorType::Reduce:
    case OperatorType::Extract:
    case OperatorType::CodeMap:
    case OperatorType::CodeReduce:
      if (op.output_schema.empty()) issue("empty_schema", "output schema required");
      break;
    case OperatorType::ParallelMap:
      break;  // branch schemas checked in check_class
    case OperatorType::Filter:
    case OperatorType::CodeFilter:
      if (op.output_schema.size() != 1 ||
          op.output_schema.begin()->second.kind != ValueKind::Boolean)
        issue("filter_schema", "filters output exactly one boolean key");
      break;
    case OperatorType::Split:
    case OperatorType::Gather:
    case OperatorType::Unnest:
    case OperatorType::Sample:
      if (!op.output_schema.empty())
        issue("unexpected_schema", "restructuring operators declare no schema");
      break;
  }
}

void check_against_upstream(const OperatorConfig& op, const std::set<std::string>& avail,
                            std::vector<ValidationIssue>& out) {
  auto issue = [&](const std::string& rule, const std::string& detail) {
    out.push_back({op.id, rule, detail});
  };
  for (const auto& key : op.referenced_keys()) {
    if (!avail.count(key))
      issue("dangling_placeholder", "prompt references unavailable key '" + key + "'");
  }
  if (op.type == OperatorType::Reduce || op.type == OperatorType::CodeReduce) {
    for (const auto& k : op.group_by)
      if (!avail.count(k)) issue("missing_group_key", "group-by key '" + k + "' unavailable");
  } else if (!op.group_by.empty()) {
    issue("unexpected_group_by", "group_by on a non-reduce operator");
  }
  if (op.type == OperatorType::Sample) {
    if (!op.sampling.has_value()) {
      issue("missing_sampling", "sample operator needs a sampling spec");
    } else {
      const auto& s = *op.sampling;
      if (s.k < 1) issue("sampling_spec", "sample size must be positive");
      const bool needs_query =
          s.method == SampleMethod::Bm25 || s.method == SampleMethod::Embedding;
      if (needs_query && (!s.query || s.query->empty()))
        issue("sampling_spec", "query required for bm25/embedding sampling");
      if (!needs_query && s.query && !s.query->empty())
        issue("sampling_spec", "query only valid for bm25/embedding sampling");
      if (s.method == SampleMethod::Stratified) {
        if (s.strata_keys.empty())
          issue("sampling_spec", "strata keys required for stratified sampling");
        for (const auto& k : s.strata_keys)
          if (!avail.count(k)) issue("missing_strata_key", "strata key '" + k + "' unavailable");
      } else if (!s.strata_keys.empty()) {
        issue("sampling_spec", "strata keys only valid for stratified sampling");
      }
    }
  } else if (op.sampling.has_value()) {
    issue("unexpected_sampling", "sampling spec on a non-sample operator");
  }
  if (op.type == OperatorType::Split) {
    auto it = op.extras.find("split_key");
    if (it == op.extras.end() || it->second.empty()) {
      issue("split_config", "split needs extras.split_key");
    } else if (!avail.count(it->second)) {
      issue("split_config", "split key '" + it->second + "' unavailable");
    }
    auto cs = op.extras.find("chunk_size");
    if (cs != op.extras.end()) {
      char* end = nullptr;
      long v = std::strtol(cs->second.c_str(), &end, 10);
      if (end == nullptr || *end != '\0' || v <= 0)
        issue("split_config", "chunk_size must be a positive integer");
    }
  }
  if (op.type == OperatorType::CodeFilter) {
    auto it = op.extras.find("predicate_key");
    if (it != op.extras.end() && !avail.count(it->second))
      issue("dangling_predicate_key", "predicate key '" + it->second + "' unavailable");
  }
}

}  // namespace

ValidationReport validate_pipeline(const PipelineSpec& p) {
  ValidationReport report;
  if (p.operators.empty()) {
    report.violations.push_back({"", "empty_pipeline", "pipeline has no operators"});
    return report;
  }
  std::set<std::string> seen_ids;
  for (const auto& op : p.operators) {
    if (op.id.empty())
      report.violations.push_back({op.id, "invalid_id", "operator id must be non-empty"});
    else if (!seen_ids.insert(op.id).second)
      report.violations.push_back({op.id, "duplicate_id", "operator id repeats"});
  }
  std::set<std::string> avail = p.input_keys;
  for (const auto& op : p.operators) {
    check_class(op, report.violations);
    check_schema_shape(op, report.violations);
    check_against_upstream(op, avail, report.violations);
    thread_keys(op, avail);
  }
  return report;
}

std::string ValidationReport::to_string() const {
  if (ok()) return "ok";
  std::ostringstream os;
  for (const auto& v : violations) {
    os << (v.operator_id.empty() ? "<pipeline>" : v.operator_id) << ": " << v.rule
       << " (" << v.detail << ")\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Cost model
// ---------------------------------------------------------------------------

Money estimate_cost(const PipelineSpec& p, const WorkloadProfile& profile) {
  double total = 0.0;
  for (const auto& op : p.operators) {
    if (!is_llm(op.type)) continue;  // c(code_op) = 0; auxiliary ops too
    const ModelInfo* model = profile.catalog.find(op.model.value_or(""));
    if (model == nullptr)
      fail(ErrorKind::UnknownModel,
           "operator '" + op.id + "' references unknown model '" + op.model.value_or("") + "'");
    auto op_load = profile.per_operator.find(op.id);
    const OperatorLoad base =
        op_load == profile.per_operator.end() ? OperatorLoad{} : op_load->second;
    size_t branch_count = op.type == OperatorType::ParallelMap ? op.branches.size() : 1;
    for (size_t b = 0; b < branch_count; ++b) {
      OperatorLoad load = base;
      if (op.type == OperatorType::ParallelMap) {
        auto it = profile.per_operator.find(op.id + "#" + std::to_string(b));
        if (it != profile.per_operator.end()) load = it->second;
      }
      total += load.documents * (load.input_tokens * model->input_price_per_token +
                                 load.output_tokens * model->output_price_per_token);
    }
  }
  return Money::from_dollars(total);
}

// ---------------------------------------------------------------------------
// Canonical serialization
// ---------------------------------------------------------------------------

namespace {

// Escape the field/record delimiters so the encoding stays injective.
std::string esc(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '%': out += "%25"; break;
      case ';': out += "%3b"; break;
      case ',': out += "%2c"; break;
      case '=': out += "%3d"; break;
      case '\n': out += "%0a"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string schema_field(const Schema& s) {
  std::vector<std::string> parts;
  for (const auto& [k, v] : s) parts.push_back(esc(k) + "=" + esc(v.to_string()));
  return join(parts, ",");
}

}  // namespace

std::string canonical_serialize(const PipelineSpec& p) {
  std::ostringstream os;
  for (const auto& op : p.operators) {
    os << "op=" << to_string(op.type);
    os << ";prompt=" << esc(op.prompt);
    os << ";code=" << esc(op.code_body);
    os << ";schema=" << schema_field(op.output_schema);
    os << ";model=" << esc(op.model.value_or(""));
    std::vector<std::string> group;
    for (const auto& g : op.group_by) group.push_back(esc(g));
    os << ";group=" << join(group, ",");
    os << ";sampling=";
    if (op.sampling) {
      const auto& s = *op.sampling;
      std::vector<std::string> strata;
      for (const auto& k : s.strata_keys) strata.push_back(esc(k));
      os << to_string(s.method) << "," << s.k << "," << esc(s.query.value_or("")) << ","
         << join(strata, ",");
    }
    os << ";branches=";
    for (size_t i = 0; i < op.branches.size(); ++i) {
      if (i) os << ",";
      os << esc(op.branches[i].prompt) << "," << esc(schema_field(op.branches[i].output_schema));
    }
    os << ";extras=";
    bool first = true;
    for (const auto& [k, v] : op.extras) {
      if (!first) os << ",";
      first = false;
      os << esc(k) << "=" << esc(v);
    }
    os << "\n";
  }
  return os.str();
}

std::string pipeline_key(const PipelineSpec& p) { return sha256_hex(canonical_serialize(p)); }

// ---------------------------------------------------------------------------
// YAML I/O
// ---------------------------------------------------------------------------

namespace {

Schema schema_from_node(const YAML::Node& node) {
  Schema s;
  if (!node) return s;
  if (!node.IsMap()) fail(ErrorKind::Parse, "output_schema must be a map");
  for (const auto& kv : node)
    s[kv.first.as<std::string>()] = ValueType::parse(kv.second.as<std::string>());
  return s;
}

OperatorConfig operator_from_node(const YAML::Node& node) {
  OperatorConfig op;
  if (!node["id"]) fail(ErrorKind::Parse, "operator missing id");
  if (!node["type"]) fail(ErrorKind::Parse, "operator missing type");
  op.id = node["id"].as<std::string>();
  op.type = operator_type_from_string(node["type"].as<std::string>());
  if (node["prompt"]) op.prompt = node["prompt"].as<std::string>();
  if (node["code"]) op.code_body = node["code"].as<std::string>();
  op.output_schema = schema_from_node(node["output_schema"]);
  if (node["model"]) op.model = node["model"].as<std::string>();
  if (node["group_by"])
    for (const auto& k : node["group_by"]) op.group_by.push_back(k.as<std::string>());
  if (node["sampling"]) {
    const auto& sn = node["sampling"];
    SamplingSpec s;
    if (sn["method"]) s.method = sample_method_from_string(sn["method"].as<std::string>());
    if (sn["k"]) s.k = sn["k"].as<int>();
    if (sn["query"]) s.query = sn["query"].as<std::string>();
    if (sn["strata_keys"])
      for (const auto& k : sn["strata_keys"]) s.strata_keys.push_back(k.as<std::string>());
    op.sampling = std::move(s);
  }
  if (node["branches"]) {
    for (const auto& bn : node["branches"]) {
      BranchSpec b;
      if (bn["prompt"]) b.prompt = bn["prompt"].as<std::string>();
      b.output_schema = schema_from_node(bn["output_schema"]);
      op.branches.push_back(std::move(b));
    }
  }
  if (node["extras"]) {
    for (const auto& kv : node["extras"])
      op.extras[kv.first.as<std::string>()] = kv.second.as<std::string>();
  }
  return op;
}

void emit_schema(YAML::Emitter& out, const Schema& s) {
  out << YAML::BeginMap;
  for (const auto& [k, v] : s) out << YAML::Key << k << YAML::Value << v.to_string();
  out << YAML::EndMap;
}

}  // namespace

PipelineSpec pipeline_from_yaml(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    fail(ErrorKind::Parse, std::string("bad pipeline YAML: ") + e.what());
  }
  if (!root.IsMap()) fail(ErrorKind::Parse, "pipeline YAML must be a map");
  PipelineSpec p;
  if (root["name"]) p.name = root["name"].as<std::string>();
  if (root["input_keys"])
    for (const auto& k : root["input_keys"]) p.input_keys.insert(k.as<std::string>());
  if (!root["operators"] || !root["operators"].IsSequence())
    fail(ErrorKind::Parse, "pipeline YAML needs an operators list");
  try {
    for (const auto& on : root["operators"]) p.operators.push_back(operator_from_node(on));
  } catch (const YAML::Exception& e) {
    fail(ErrorKind::Parse, std::string("bad operator entry: ") + e.what());
  }
  return p;
}

std::string pipeline_to_yaml(const PipelineSpec& p) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << p.name;
  out << YAML::Key << "input_keys" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto& k : p.input_keys) out << k;
  out << YAML::EndSeq;
  out << YAML::Key << "operators" << YAML::Value << YAML::BeginSeq;
  for (const auto& op : p.operators) {
    out << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << op.id;
    out << YAML::Key << "type" << YAML::Value << to_string(op.type);
    if (!op.prompt.empty()) out << YAML::Key << "prompt" << YAML::Value << op.prompt;
    if (!op.code_body.empty()) out << YAML::Key << "code" << YAML::Value << YAML::Literal << op.code_body;
    if (!op.output_schema.empty()) {
      out << YAML::Key << "output_schema" << YAML::Value;
      emit_schema(out, op.output_schema);
    }
    if (op.model) out << YAML::Key << "model" << YAML::Value << *op.model;
    if (!op.group_by.empty()) {
      out << YAML::Key << "group_by" << YAML::Value << YAML::Flow << YAML::BeginSeq;
      for (const auto& g : op.group_by) out << g;
      out << YAML::EndSeq;
    }
    if (op.sampling) {
      const auto& s = *op.sampling;
      out << YAML::Key << "sampling" << YAML::Value << YAML::BeginMap;
      out << YAML::Key << "method" << YAML::Value << to_string(s.method);
      out << YAML::Key << "k" << YAML::Value << s.k;
      if (s.query) out << YAML::Key << "query" << YAML::Value << *s.query;
      if (!s.strata_keys.empty()) {
        out << YAML::Key << "strata_keys" << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (const auto& k : s.strata_keys) out << k;
        out << YAML::EndSeq;
      }
      out << YAML::EndMap;
    }
    if (!op.branches.empty()) {
      out << YAML::Key << "branches" << YAML::Value << YAML::BeginSeq;
      for (const auto& b : op.branches) {
        out << YAML::BeginMap;
        out << YAML::Key << "prompt" << YAML::Value << b.prompt;
        out << YAML::Key << "output_schema" << YAML::Value;
        emit_schema(out, b.output_schema);
        out << YAML::EndMap;
      }
      out << YAML::EndSeq;
    }
    if (!op.extras.empty()) {
      out << YAML::Key << "extras" << YAML::Value << YAML::BeginMap;
      for (const auto& [k, v] : op.extras) out << YAML::Key << k << YAML::Value << v;
      out << YAML::EndMap;
    }
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::EndMap;
  std::string text = out.c_str();
  text.push_back('\n');
  return text;
}

ModelCatalog catalog_from_yaml(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    fail(ErrorKind::Parse, std::string("bad model catalog YAML: ") + e.what());
  }
  if (!root["models"] || !root["models"].IsSequence())
    fail(ErrorKind::Parse, "model catalog needs a top-level models list");
  ModelCatalog c;
  try {
    for (const auto& mn : root["models"]) {
      ModelInfo m;
      m.model_id = mn["model_id"].as<std::string>();
      m.family = mn["family"] ? mn["family"].as<std::string>() : std::string();
      if (mn["input_price_per_token"]) m.input_price_per_token = mn["input_price_per_token"].as<double>();
      if (mn["output_price_per_token"]) m.output_price_per_token = mn["output_price_per_token"].as<double>();
      if (mn["context_window_tokens"]) m.context_window_tokens = mn["context_window_tokens"].as<long long>();
      if (mn["quality_hint"]) m.quality_hint = mn["quality_hint"].as<double>();
      c.entries.push_back(std::move(m));
    }
  } catch (const YAML::Exception& e) {
    fail(ErrorKind::Parse, std::string("bad model entry: ") + e.what());
  }
  c.check();
  return c;
}

std::string catalog_to_yaml(const ModelCatalog& c) {
  YAML::Emitter out;
  out << YAML::BeginMap << YAML::Key << "models" << YAML::Value << YAML::BeginSeq;
  for (const auto& m : c.entries) {
    out << YAML::BeginMap;
    out << YAML::Key << "model_id" << YAML::Value << m.model_id;
    out << YAML::Key << "family" << YAML::Value << m.family;
    out << YAML::Key << "input_price_per_token" << YAML::Value << m.input_price_per_token;
    out << YAML::Key << "output_price_per_token" << YAML::Value << m.output_price_per_token;
    out << YAML::Key << "context_window_tokens" << YAML::Value << m.context_window_tokens;
    out << YAML::Key << "quality_hint" << YAML::Value << m.quality_hint;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  std::string text = out.c_str();
  text.push_back('\n');
  return text;
}

}  // namespace moar
