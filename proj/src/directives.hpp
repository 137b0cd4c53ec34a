#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ir.hpp"

namespace moar {

using Json = nlohmann::json;

enum class DirectiveCategory {
  FusionReordering,
  CodeSynthesis,
  DataDecomposition,
  ProjectionSynthesis,
  LlmCentric,
};
const char* to_string(DirectiveCategory c);

enum class Objective { ImproveAccuracy, ReduceCost };
const char* to_string(Objective o);

/// Contiguous operator subsequence, inclusive on both ends.
struct Span {
  int start = 0;
  int end = 0;

  int length() const { return end - start + 1; }
  bool operator==(const Span&) const = default;
};

// ---------------------------------------------------------------------------
// LHS patterns
// ---------------------------------------------------------------------------

/// Per-operator predicate; sees the candidate config and the key set
/// available just before it.
using OpPredicate =
    std::function<bool(const OperatorConfig&, const std::set<std::string>&)>;

struct LhsElement {
  std::set<OperatorType> types;
  OpPredicate pred;  // optional
};

struct SpanMatch {
  const PipelineSpec& pipeline;
  Span span;
  std::set<std::string> keys_before;
};

/// Pattern over a contiguous operator subsequence. Element predicates are
/// pure functions of the matched config and the keys available at the match
/// site; span_pred sees the whole candidate match (used for cross-operator
/// conditions such as equal group-by keys or downstream-reference safety).
struct LhsPattern {
  std::vector<LhsElement> elements;
  std::function<bool(const SpanMatch&)> span_pred;  // optional
  bool whole_pipeline = false;  // matches the entire operator list as one site
  std::string signature;        // e.g. "map -> filter => map -> code_filter"
};

// ---------------------------------------------------------------------------
// Parameter schemas
// ---------------------------------------------------------------------------

enum class ParamType { String, Int, Number, Bool, StringList, EditList };

struct ParamField {
  std::string name;
  ParamType type = ParamType::String;
  bool required = true;
  std::optional<double> min_value;
  std::optional<double> max_value;
  std::vector<std::string> allowed;  // enum constraint for strings
  std::string doc;
};

struct ParamContext {
  const PipelineSpec& pipeline;
  Span span;
  const ModelCatalog* catalog = nullptr;  // present when the host supplies one
};

/// Declarative parameter constraints plus an optional contextual validator
/// (preserved placeholders, model membership, unique search strings, ...).
struct ParamSchema {
  std::vector<ParamField> fields;
  std::function<std::string(const Json&, const ParamContext&)> validator;

  /// Empty string when valid, otherwise a human-readable error (fed back to
  /// the agent for refinement).
  std::string validate(const Json& params, const ParamContext& ctx) const;
  std::string describe() const;
};

// ---------------------------------------------------------------------------
// Directives
// ---------------------------------------------------------------------------

struct RewriteRecord {
  std::string directive_name;
  Span match_span;
  Json params = Json::object();
  Objective objective = Objective::ImproveAccuracy;
};

struct Directive {
  std::string name;
  DirectiveCategory category = DirectiveCategory::LlmCentric;
  std::string short_doc;  // stage-1 disclosure: description + use-case guidance
  std::string full_doc;   // stage-2 disclosure: instantiation schema + example
  LhsPattern lhs;
  /// Relaxed pattern used when an agent asserts semantic preconditions itself
  /// (reordering); absent for everything else.
  std::optional<LhsPattern> relaxed_lhs;
  ParamSchema param_schema;
  bool param_sensitive = false;
  int candidate_count = 1;
  std::function<PipelineSpec(const PipelineSpec&, const RewriteRecord&)> apply_fn;
};

/// All and only contiguous spans where the op-type sequence and predicates
/// hold, ascending by start index. `agent_override` switches to relaxed_lhs
/// when the directive provides one.
std::vector<Span> match_sites(const Directive& d, const PipelineSpec& p,
                              bool agent_override = false);

/// Apply `d` at `r.match_span` with `r.params`. Throws Error(InvalidParams)
/// on schema violations and Error(RewriteInvalid) when the rewritten pipeline
/// fails validation. The input pipeline is never modified.
PipelineSpec apply(const Directive& d, const PipelineSpec& p, const RewriteRecord& r,
                   const ModelCatalog* catalog = nullptr);

/// Search-time pruning of cycles and no-ops given the root-to-target rewrite
/// history. Output is a subset of the input and independent of its order.
std::vector<const Directive*> prune_registry(const PipelineSpec& p_star,
                                             const std::vector<RewriteRecord>& path,
                                             const std::vector<const Directive*>& registry);

class Registry {
 public:
  /// The compiled-in directive catalog.
  static const Registry& builtin();

  const std::vector<Directive>& all() const { return directives_; }
  const Directive* find(const std::string& name) const;
  std::vector<const Directive*> pointers() const;
  /// Catalog (name, category, short_doc, LHS signature) for `registry dump`
  /// and the agent protocol's stage-1 payload.
  Json dump() const;

 private:
  friend Registry build_registry();
  std::vector<Directive> directives_;
};

// Shared helpers for apply bodies and the stub instantiator.

/// Deterministic fresh operator id: `base`, then `base_2`, `base_3`, ...
std::string fresh_operator_id(const PipelineSpec& p, const std::string& base);

/// Append a rewrite tag to extras["tags"] (comma-joined, sorted, unique).
/// Tags are annotations on the canonical form; the simulated evaluator keys
/// directive effects on them.
void add_rewrite_tag(OperatorConfig& op, const std::string& tag);

/// Tags present anywhere in the pipeline, plus structural markers
/// ("chunked" when a split exists, "sampled" when a sample exists).
std::set<std::string> rewrite_features(const PipelineSpec& p);

/// Number of LLM-powered operators (parallel_map counts once per branch).
int llm_call_count(const PipelineSpec& p);

}  // namespace moar
