#pragma once

#include <map>
#include <string>

#include "evaluator.hpp"
#include "ir.hpp"

namespace moar {

/// Synthetic accuracy/cost landscape. Accuracy multiplies per-operator
/// qualities (model quality with a context-window penalty for LLM operators,
/// a flat code quality for code operators), per-feature effects, and pairwise
/// feature interactions, plus seeded noise keyed on the canonical form.
/// Interaction terms deliberately let locally poor rewrites combine into
/// globally strong pipelines.
struct LandscapeModel {
  int version = 1;
  uint64_t seed = 0;
  double noise_scale = 0.0;

  // document flow
  double base_doc_tokens = 20000;
  double base_docs = 40;
  double tokens_per_word = 1.3;
  double output_tokens_per_key = 60;
  double list_output_multiplier = 3.0;
  double extract_output_factor = 0.25;
  double code_filter_selectivity = 0.6;
  double default_group_count = 5;
  double aggregate_doc_tokens = 400;

  // accuracy
  double task_base_accuracy = 1.0;
  double code_quality = 0.82;
  double context_penalty_floor = 0.1;
  std::map<std::string, double> model_quality;     // overrides catalog quality_hint
  std::map<std::string, double> feature_effects;   // feature -> multiplier
  std::map<std::string, double> interactions;      // "a|b" (sorted) -> multiplier

  static LandscapeModel from_yaml(const std::string& yaml_text);
  std::string to_yaml() const;

  /// Shipped landscapes: "default" (mild, monotone-ish) and "adversarial"
  /// (strong pairwise interactions; greedy traps).
  static LandscapeModel builtin(const std::string& name);
};

class SimulatedEvaluator : public Evaluator {
 public:
  SimulatedEvaluator(LandscapeModel model, ModelCatalog catalog, uint64_t run_seed = 0);

  EvalResult evaluate(const PipelineSpec& p) override;

  /// Token/document flow the cost side derives from the landscape; exposed so
  /// tests can check simulate() == estimate_cost() on the synthesized profile.
  WorkloadProfile profile_for(const PipelineSpec& p) const;

  const LandscapeModel& model() const { return model_; }
  const ModelCatalog& catalog() const { return catalog_; }

 private:
  double accuracy_for(const PipelineSpec& p) const;

  LandscapeModel model_;
  ModelCatalog catalog_;
  uint64_t run_seed_;
};

}  // namespace moar
