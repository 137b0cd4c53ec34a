#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "directives.hpp"
#include "money.hpp"

namespace moar {

struct ModelStat {
  Money cost;
  double accuracy = 0.0;
};

struct DirectiveStat {
  double mean_cost_delta_dollars = 0.0;
  double mean_accuracy_delta = 0.0;
  int samples = 0;
};

struct ExploredPath {
  std::string path;  // e.g. "ROOT -> model_substitution(gpt-small) -> doc_chunking"
  Money cost;
  double accuracy = 0.0;
};

/// Everything the directive-choosing step sees about the search state.
struct AgentContext {
  std::string pipeline_yaml;
  Json directive_briefs = Json::array();  // stage-1 docs for the pruned registry
  std::vector<ExploredPath> explored_paths;
  std::string current_path;
  int depth = 0;
  std::map<std::string, ModelStat> model_stats;
  std::map<std::string, DirectiveStat> directive_stats;
  Objective objective = Objective::ImproveAccuracy;
  /// nu(P*, d) usage counts at the target node.
  std::map<std::string, int> usage;
  /// Models already used along the path (current operators + past
  /// substitutions); gates the stub's model_substitution preference.
  std::set<std::string> models_tried;
};

/// Iterates the optimization sample deterministically.
class DocPeek {
 public:
  virtual ~DocPeek() = default;
  virtual std::optional<Json> read_next_doc() = 0;  // nullopt at end of sample
};

class JsonlDocPeek : public DocPeek {
 public:
  explicit JsonlDocPeek(const std::string& jsonl_text);
  std::optional<Json> read_next_doc() override;

 private:
  std::vector<Json> docs_;
  size_t next_ = 0;
};

struct ChooseRequest {
  const PipelineSpec& pipeline;
  std::vector<const Directive*> allowed;  // already pruned
  const AgentContext& context;
};

struct Choice {
  std::string directive_name;
  Span span;
};

class Instantiator {
 public:
  virtual ~Instantiator() = default;

  /// Pick a directive from the pruned list and a target span.
  /// Throws Error(NoApplicableDirective) when nothing matches anywhere.
  virtual Choice choose(const ChooseRequest& req) = 0;

  /// Produce candidate_count parameter objects, each valid against the
  /// directive's param schema.
  virtual std::vector<Json> instantiate(const Directive& d, const PipelineSpec& p, Span span,
                                        Objective objective, DocPeek* peek) = 0;

  /// Whether this instantiator may use relaxed LHS matching (it verifies
  /// semantic preconditions itself).
  virtual bool agent_override() const { return false; }
};

/// Deterministic rule-based instantiator; the fully offline default.
/// Preference tiers:
///   reduce_cost:      model_substitution (cheapest model not yet on the
///                     path), then fusion directives, then code synthesis.
///   improve_accuracy: clarify_instructions, doc_chunking, few_shot_examples.
/// Within a tier, lowest nu(P,d) wins, ties by name; unlisted directives form
/// a final fallback tier. The span is always the first match site.
class StubInstantiator : public Instantiator {
 public:
  StubInstantiator(ModelCatalog catalog, uint64_t seed);

  Choice choose(const ChooseRequest& req) override;
  std::vector<Json> instantiate(const Directive& d, const PipelineSpec& p, Span span,
                                Objective objective, DocPeek* peek) override;

  const ModelCatalog& catalog() const { return catalog_; }

 private:
  ModelCatalog catalog_;
  uint64_t seed_;
};

/// Agent adapter speaking JSON-over-HTTP with the two-step progressive
/// disclosure protocol (stage 1: briefs only; stage 2: full documentation,
/// read_next_doc tool access, schema-validation retry loop).
std::unique_ptr<Instantiator> make_agent_instantiator(const std::string& endpoint,
                                                      ModelCatalog catalog,
                                                      int retry_limit = 3);

}  // namespace moar
