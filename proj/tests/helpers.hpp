#pragma once

// Shared fixtures for the unit and acceptance suites: a corpus of seed
// pipelines spanning every directive's LHS shape, plus small model catalogs.

#include <string>
#include <vector>

#include "ir.hpp"

namespace moar::testing {

inline OperatorConfig llm_op(std::string id, OperatorType type, std::string prompt,
                             Schema schema, std::string model = "gpt-large") {
  OperatorConfig op;
  op.id = std::move(id);
  op.type = type;
  op.prompt = std::move(prompt);
  op.output_schema = std::move(schema);
  op.model = std::move(model);
  return op;
}

inline ModelCatalog small_catalog() {
  ModelCatalog c;
  c.entries = {
      {"gpt-large", "gpt", 1.0e-5, 3.0e-5, 200000, 0.86},
      {"gpt-mid", "gpt", 2.5e-6, 1.0e-5, 200000, 0.78},
      {"flash-small", "flash", 1.5e-7, 6.0e-7, 128000, 0.62},
  };
  return c;
}

inline ModelCatalog large_catalog() {
  ModelCatalog c;
  for (int family = 0; family < 5; ++family) {
    int members = family < 4 ? 3 : 2;  // 14 models over 5 families
    for (int j = 0; j < members; ++j) {
      ModelInfo m;
      m.model_id = "fam" + std::to_string(family) + "-m" + std::to_string(j);
      m.family = "fam" + std::to_string(family);
      m.input_price_per_token = 1e-6 * (family + 1) * (j + 1);
      m.output_price_per_token = 3e-6 * (family + 1) * (j + 1);
      m.context_window_tokens = 128000;
      m.quality_hint = 0.5 + 0.03 * family + 0.02 * j;
      c.entries.push_back(std::move(m));
    }
  }
  return c;
}

inline PipelineSpec seed_single_map() {
  PipelineSpec p;
  p.name = "single_map";
  p.input_keys = {"case_id", "notes"};
  p.operators.push_back(llm_op(
      "extract_factors", OperatorType::Map,
      "Given the text in {{ input.notes }}, return all the enhancement factors present, "
      "along with supporting evidence.",
      {{"enhancements", ValueType{ValueKind::ListObject, {"evidence", "factor"}}}}));
  return p;
}

inline PipelineSpec seed_map_filter() {
  PipelineSpec p;
  p.name = "map_filter";
  p.input_keys = {"case_id", "notes"};
  p.operators.push_back(llm_op("extract_incidents", OperatorType::Map,
                               "Extract force incidents from {{ input.notes }}.",
                               {{"incidents", ValueType{ValueKind::ListString, {}}}}));
  p.operators.push_back(llm_op("firearm_only", OperatorType::Filter,
                               "Does {{ input.notes }} involve a firearm?",
                               {{"involves_firearm", boolean_type()}}));
  return p;
}

inline PipelineSpec seed_filter_map() {
  PipelineSpec p;
  p.name = "filter_map";
  p.input_keys = {"case_id", "notes"};
  p.operators.push_back(llm_op("violent_only", OperatorType::Filter,
                               "Does {{ input.notes }} describe a violent incident?",
                               {{"is_violent", boolean_type()}}));
  p.operators.push_back(llm_op("extract_snippets", OperatorType::Map,
                               "Extract excessive-force snippets from {{ input.notes }}.",
                               {{"snippets", ValueType{ValueKind::ListString, {}}}}));
  return p;
}

inline PipelineSpec seed_map_reduce() {
  PipelineSpec p;
  p.name = "map_reduce";
  p.input_keys = {"case_id", "case_type", "notes"};
  p.operators.push_back(llm_op("extract", OperatorType::Map,
                               "List the enhancement factors in {{ input.notes }}.",
                               {{"factors", ValueType{ValueKind::ListString, {}}}}));
  OperatorConfig reduce = llm_op("summarize", OperatorType::Reduce,
                                 "Summarize {{ input.factors }} for case type "
                                 "{{ input.case_type }}.",
                                 {{"summary", string_type()}});
  reduce.group_by = {"case_type"};
  p.operators.push_back(std::move(reduce));
  return p;
}

inline PipelineSpec seed_map_map() {
  PipelineSpec p;
  p.name = "map_map";
  p.input_keys = {"case_id", "notes"};
  p.operators.push_back(llm_op("themes", OperatorType::Map,
                               "List the themes present in {{ input.notes }}.",
                               {{"themes", ValueType{ValueKind::ListString, {}}}}));
  p.operators.push_back(llm_op("sentiment", OperatorType::Map,
                               "Rate the sentiment of {{ input.notes }}.",
                               {{"sentiment", string_type()}}));
  return p;
}

inline PipelineSpec seed_reduce_only() {
  PipelineSpec p;
  p.name = "reduce_only";
  p.input_keys = {"precinct_id", "notes"};
  OperatorConfig reduce = llm_op("per_precinct", OperatorType::Reduce,
                                 "Report common themes across the reports in {{ input.notes }} "
                                 "for precinct {{ input.precinct_id }}.",
                                 {{"themes_report", string_type()}});
  reduce.group_by = {"precinct_id"};
  p.operators.push_back(std::move(reduce));
  return p;
}

inline PipelineSpec seed_chunked() {
  PipelineSpec p;
  p.name = "chunked";
  p.input_keys = {"case_id", "notes"};
  OperatorConfig split;
  split.id = "split_notes";
  split.type = OperatorType::Split;
  split.extras = {{"split_key", "notes"}, {"chunk_size", "1000"}, {"chunk_key_out", "notes_chunk"}};
  p.operators.push_back(std::move(split));
  OperatorConfig gather;
  gather.id = "gather_notes";
  gather.type = OperatorType::Gather;
  gather.extras = {{"context_before", "1"}, {"context_after", "1"}};
  p.operators.push_back(std::move(gather));
  p.operators.push_back(llm_op("extract_chunk", OperatorType::Map,
                               "Extract factors from {{ input.notes_chunk }}.",
                               {{"factors", ValueType{ValueKind::ListString, {}}}}));
  OperatorConfig reduce = llm_op("combine", OperatorType::Reduce,
                                 "Merge the chunk-level {{ input.factors }} for case "
                                 "{{ input.case_id }}.",
                                 {{"factors", ValueType{ValueKind::ListString, {}}}});
  reduce.group_by = {"case_id"};
  p.operators.push_back(std::move(reduce));
  return p;
}

inline PipelineSpec seed_parallel() {
  PipelineSpec p;
  p.name = "parallel";
  p.input_keys = {"case_id", "notes"};
  OperatorConfig pm;
  pm.id = "facets";
  pm.type = OperatorType::ParallelMap;
  pm.model = "gpt-large";
  pm.branches.push_back({"Name the officers in {{ input.notes }}.",
                         {{"officers", ValueType{ValueKind::ListString, {}}}}});
  pm.branches.push_back({"Name the locations in {{ input.notes }}.",
                         {{"locations", ValueType{ValueKind::ListString, {}}}}});
  p.operators.push_back(std::move(pm));
  return p;
}

inline std::vector<PipelineSpec> seed_corpus() {
  return {seed_single_map(), seed_map_filter(), seed_filter_map(), seed_map_reduce(),
          seed_map_map(),    seed_reduce_only(), seed_chunked(),   seed_parallel()};
}

}  // namespace moar::testing
