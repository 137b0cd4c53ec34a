#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "money.hpp"

namespace moar {

// ---------------------------------------------------------------------------
// Operator types
// ---------------------------------------------------------------------------

enum class OperatorType {
  Map,
  ParallelMap,
  Reduce,
  Filter,
  Split,
  Gather,
  Unnest,
  Sample,
  Extract,
  CodeMap,
  CodeReduce,
  CodeFilter,
};

/// LLM-powered operators carry a prompt template and a model.
bool is_llm(OperatorType t);
/// Code-powered operators carry a synthesized code body and never a model.
bool is_code(OperatorType t);
/// Restructuring operators (split/gather/unnest/sample) carry neither.
bool is_auxiliary(OperatorType t);

const char* to_string(OperatorType t);
OperatorType operator_type_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Output schemas
// ---------------------------------------------------------------------------

enum class ValueKind { String, Number, Boolean, ListString, ListObject };

/// A schema value type. ListObject carries flat string-valued field names.
struct ValueType {
  ValueKind kind = ValueKind::String;
  std::vector<std::string> object_fields;  // ListObject only; kept sorted

  static ValueType parse(const std::string& text);
  std::string to_string() const;

  bool operator==(const ValueType& o) const = default;
};

inline ValueType string_type() { return ValueType{ValueKind::String, {}}; }
inline ValueType boolean_type() { return ValueType{ValueKind::Boolean, {}}; }

using Schema = std::map<std::string, ValueType>;

// ---------------------------------------------------------------------------
// Operator configuration
// ---------------------------------------------------------------------------

enum class SampleMethod { Random, Bm25, Embedding, Stratified };
const char* to_string(SampleMethod m);
SampleMethod sample_method_from_string(const std::string& s);

struct SamplingSpec {
  SampleMethod method = SampleMethod::Random;
  int k = 1;
  std::optional<std::string> query;       // required iff bm25/embedding
  std::vector<std::string> strata_keys;   // required iff stratified

  bool operator==(const SamplingSpec&) const = default;
};

/// One branch of a parallel_map: an independent (prompt, schema) pair.
struct BranchSpec {
  std::string prompt;
  Schema output_schema;

  bool operator==(const BranchSpec&) const = default;
};

struct OperatorConfig {
  std::string id;
  OperatorType type = OperatorType::Map;
  std::string prompt;      // LLM operators (except parallel_map, see branches)
  std::string code_body;   // code operators
  Schema output_schema;
  std::optional<std::string> model;
  std::vector<std::string> group_by;       // reduce / code_reduce
  std::optional<SamplingSpec> sampling;    // sample
  std::vector<BranchSpec> branches;        // parallel_map
  std::map<std::string, std::string> extras;

  /// Union of branch schemas for parallel_map, output_schema otherwise.
  Schema effective_schema() const;
  /// Placeholder keys referenced by the prompt(s), in first-appearance order.
  std::vector<std::string> referenced_keys() const;

  bool operator==(const OperatorConfig&) const = default;
};

struct PipelineSpec {
  std::string name;
  std::set<std::string> input_keys;
  std::vector<OperatorConfig> operators;

  bool operator==(const PipelineSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Model catalog
// ---------------------------------------------------------------------------

struct ModelInfo {
  std::string model_id;
  std::string family;
  double input_price_per_token = 0.0;
  double output_price_per_token = 0.0;
  long long context_window_tokens = 0;
  double quality_hint = 0.5;  // [0,1]; drives the simulated evaluator
};

struct ModelCatalog {
  std::vector<ModelInfo> entries;

  const ModelInfo* find(const std::string& model_id) const;
  /// Throws Error(Validation) when ids repeat, prices are negative, a context
  /// window is non-positive, or a family is empty.
  void check() const;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct ValidationIssue {
  std::string operator_id;  // empty for pipeline-level violations
  std::string rule;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationIssue> violations;

  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

/// Structural well-formedness: operator class rules, schema shape, placeholder
/// threading, group-by availability, unique ids. Report-style; never throws.
ValidationReport validate_pipeline(const PipelineSpec& p);

/// Key set visible to operator i (i.e. after operators [0, i) executed).
/// i may equal operators.size(); throws Error(IndexOutOfRange) past that.
std::set<std::string> available_keys_after(const PipelineSpec& p, size_t i);

/// Placeholder keys of the form `{{ input.<key> }}`, first-appearance order,
/// de-duplicated.
std::vector<std::string> prompt_placeholders(const std::string& prompt);

// ---------------------------------------------------------------------------
// Cost model
// ---------------------------------------------------------------------------

struct OperatorLoad {
  double input_tokens = 0.0;   // per document
  double output_tokens = 0.0;  // per document
  double documents = 0.0;      // multiplicity this operator processes
};

/// Estimated per-operator token counts and document multiplicities. The key
/// "<op_id>" covers an operator; "<op_id>#<i>" overrides one parallel_map
/// branch (otherwise the operator-level load applies to each branch).
struct WorkloadProfile {
  ModelCatalog catalog;
  std::map<std::string, OperatorLoad> per_operator;
};

/// Sum over operators of tokens x price x documents. Code-powered and
/// auxiliary operators contribute exactly zero. Throws Error(UnknownModel)
/// when an LLM operator's model is missing from the profile catalog.
Money estimate_cost(const PipelineSpec& p, const WorkloadProfile& profile);

// ---------------------------------------------------------------------------
// Canonical serialization & YAML I/O
// ---------------------------------------------------------------------------

/// Deterministic byte-string over operator fields, excluding ids (and the
/// pipeline name / input keys). Two pipelines serialize identically iff all
/// operator fields except ids are equal in order. Schema keys sort within
/// each operator; the map representation keeps them sorted already.
std::string canonical_serialize(const PipelineSpec& p);

/// sha256 of canonical_serialize; the cache and frontier identity.
std::string pipeline_key(const PipelineSpec& p);

PipelineSpec pipeline_from_yaml(const std::string& yaml_text);
std::string pipeline_to_yaml(const PipelineSpec& p);

ModelCatalog catalog_from_yaml(const std::string& yaml_text);
std::string catalog_to_yaml(const ModelCatalog& c);

}  // namespace moar
