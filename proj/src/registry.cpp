#include <algorithm>
#include <sstream>

#include "directives.hpp"
#include "errors.hpp"
#include "util.hpp"

namespace moar {

namespace {

// ---------------------------------------------------------------------------
// Prompt surgery helpers
// ---------------------------------------------------------------------------

// Rewrite `{{ input.<from> }}` placeholders to reference <to>, tolerating
// arbitrary spacing inside the braces.
std::string remap_placeholder(const std::string& prompt, const std::string& from,
                              const std::string& to) {
  std::string out;
  size_t pos = 0;
  while (true) {
    size_t open = prompt.find("{{", pos);
    if (open == std::string::npos) {
      out.append(prompt, pos, std::string::npos);
      break;
    }
    size_t close = prompt.find("}}", open + 2);
    if (close == std::string::npos) {
      out.append(prompt, pos, std::string::npos);
      break;
    }
    std::string inner = prompt.substr(open + 2, close - open - 2);
    std::string trimmed = inner;
    trimmed.erase(0, trimmed.find_first_not_of(" \t"));
    trimmed.erase(trimmed.find_last_not_of(" \t") + 1);
    out.append(prompt, pos, open - pos);
    if (trimmed == "input." + from) {
      out += "{{ input." + to + " }}";
    } else {
      out.append(prompt, open, close + 2 - open);
    }
    pos = close + 2;
  }
  return out;
}

// Replace placeholders for the given keys with plain text so a merged prompt
// does not dangle on keys the rewrite removed.
std::string strip_placeholders(const std::string& prompt, const std::set<std::string>& keys) {
  std::string out = prompt;
  for (const auto& k : keys) {
    std::string needle = "{{ input." + k + " }}";
    replace_all(out, needle, "the " + k);
    // tolerate tight spacing
    std::string tight = "{{input." + k + "}}";
    replace_all(out, tight, "the " + k);
  }
  return out;
}

void remap_all_placeholders(OperatorConfig& op, const std::string& from, const std::string& to) {
  op.prompt = remap_placeholder(op.prompt, from, to);
  for (auto& b : op.branches) b.prompt = remap_placeholder(b.prompt, from, to);
}

const std::string& filter_bool_key(const OperatorConfig& filter_op) {
  return filter_op.output_schema.begin()->first;
}

PipelineSpec replace_span(const PipelineSpec& p, Span span, std::vector<OperatorConfig> ops) {
  PipelineSpec out;
  out.name = p.name;
  out.input_keys = p.input_keys;
  out.operators.assign(p.operators.begin(), p.operators.begin() + span.start);
  for (auto& op : ops) out.operators.push_back(std::move(op));
  out.operators.insert(out.operators.end(), p.operators.begin() + span.end + 1,
                       p.operators.end());
  return out;
}

// Keys an operator consumes: prompt placeholders, group-by keys, strata keys,
// and a code_filter's predicate key.
std::set<std::string> consumed_keys(const OperatorConfig& op) {
  std::set<std::string> keys;
  for (const auto& k : op.referenced_keys()) keys.insert(k);
  for (const auto& k : op.group_by) keys.insert(k);
  if (op.sampling)
    for (const auto& k : op.sampling->strata_keys) keys.insert(k);
  auto it = op.extras.find("predicate_key");
  if (it != op.extras.end()) keys.insert(it->second);
  it = op.extras.find("split_key");
  if (it != op.extras.end()) keys.insert(it->second);
  return keys;
}

std::set<std::string> downstream_consumed(const PipelineSpec& p, int after_index) {
  std::set<std::string> keys;
  for (size_t i = size_t(after_index) + 1; i < p.operators.size(); ++i)
    for (const auto& k : consumed_keys(p.operators[i])) keys.insert(k);
  return keys;
}

std::set<std::string> schema_keys(const Schema& s) {
  std::set<std::string> keys;
  for (const auto& [k, v] : s) keys.insert(k);
  return keys;
}

// First prompt placeholder that names a key available at the site; the
// compression/summarization rewrites treat it as "the document" field.
std::optional<std::string> first_doc_key(const OperatorConfig& op,
                                         const std::set<std::string>& avail) {
  for (const auto& k : op.referenced_keys())
    if (avail.count(k)) return k;
  return std::nullopt;
}

bool has_doc_key(const OperatorConfig& op, const std::set<std::string>& avail) {
  return first_doc_key(op, avail).has_value();
}

std::string require_string(const Json& params, const std::string& key) {
  return params.at(key).get<std::string>();
}

// Validator fragment: every `{{ input.* }}` in `prompt` must be in `allowed`.
std::string check_placeholders_within(const std::string& prompt,
                                      const std::set<std::string>& allowed,
                                      const std::string& what) {
  for (const auto& k : prompt_placeholders(prompt)) {
    if (!allowed.count(k))
      return what + " references '{{ input." + k + " }}' which is not available there";
  }
  return "";
}

const std::set<OperatorType> kLlmTypes = {OperatorType::Map, OperatorType::ParallelMap,
                                          OperatorType::Reduce, OperatorType::Filter,
                                          OperatorType::Extract};
const std::set<OperatorType> kPromptedTypes = {OperatorType::Map, OperatorType::Reduce,
                                               OperatorType::Filter, OperatorType::Extract};

// ---------------------------------------------------------------------------
// Directive definitions
// ---------------------------------------------------------------------------

Directive make_same_type_fusion() {
  Directive d;
  d.name = "same_type_fusion";
  d.category = DirectiveCategory::FusionReordering;
  d.short_doc =
      "Fuses adjacent same-type operators (map-map, filter-filter, reduce-reduce) into one "
      "operator with a merged prompt and unioned output schema. Use to cut an LLM call when "
      "two neighbors do closely related work on the same documents.";
  d.lhs.signature = "map -> map | filter -> filter | reduce -> reduce => fused op";
  d.lhs.elements = {
      {{OperatorType::Map, OperatorType::Filter, OperatorType::Reduce}, nullptr},
      {{OperatorType::Map, OperatorType::Filter, OperatorType::Reduce}, nullptr}};
  d.lhs.span_pred = [](const SpanMatch& m) {
    const auto& a = m.pipeline.operators[m.span.start];
    const auto& b = m.pipeline.operators[m.span.end];
    if (a.type != b.type) return false;
    if (a.type == OperatorType::Reduce && a.group_by != b.group_by) return false;
    return true;
  };
  d.param_schema.fields = {
      {"merged_prompt", ParamType::String, true, {}, {}, {},
       "single prompt covering both operators' tasks"}};
  d.param_schema.validator = [](const Json& params, const ParamContext& ctx) {
    auto avail = available_keys_after(ctx.pipeline, size_t(ctx.span.start));
    return check_placeholders_within(params.at("merged_prompt").get<std::string>(), avail,
                                     "merged_prompt");
  };
  d.full_doc =
      "Replaces two adjacent operators of the same type with a single operator. The merged "
      "prompt must cover both tasks and may only reference keys available before the pair. "
      "Schemas are unioned (filters keep the first filter's boolean key); reduces must share "
      "group-by keys.\n\nExample: map(extract themes) -> map(rate sentiment) becomes one map "
      "with schema {themes, sentiment} and a prompt asking for both.";
  d.apply_fn = [](const PipelineSpec& p, const RewriteRecord& r) {
    const auto& a = p.operators[r.match_span.start];
    const auto& b = p.operators[r.match_span.end];
    OperatorConfig fused;
    fused.type = a.type;
    fused.id = fresh_operator_id(p, "fused_" + a.id);
    fused.prompt = require_string(r.params, "merged_prompt");
    fused.model = a.model;  // leftmost operator's model
    if (a.type == OperatorType::Filter) {
      fused.output_schema = a.output_schema;
    } else {
      fused.output_schema = a.output_schema;
      for (const auto& [k, v] : b.output_schema) fused.output_schema.emplace(k, v);
    }
    if (a.type == OperatorType::Reduce) fused.group_by = a.group_by;
    fused.extras = a.extras;
    for (const auto& [k, v] : b.extras) fused.extras.emplace(k, v);
    add_rewrite_tag(fused, "fused");
    return replace_span(p, r.match_span, {std::move(fused)});
  };
  return d;
}

Directive make_map_reduce_fusion() {
  Directive d;
  d.name = "map_reduce_fusion";
  d.category = DirectiveCategory::FusionReordering;
  d.short_doc =
      "Combines a map and the following reduce into a single reduce whose prompt performs "
      "both the per-document transformation and the aggregation. Applicable only when the "
      "map does not produce any of the reduce's group-by keys.";
  d.lhs.signature = "map -> reduce => reduce";
  d.lhs.elements = {{{OperatorType::Map}, nullptr}, {{OperatorType::Reduce}, nullptr}};
  d.lhs.span_pred = [](const SpanMatch& m) {
    const auto& map_op = m.pipeline.operators[m.span.start];
    const auto& reduce_op = m.pipeline.operators[m.span.end];
    auto produced = schema_keys(map_op.effective_schema());
    return std::none_of(reduce_op.group_by.begin(), reduce_op.group_by.end(),
                        [&](const std::string& k) { return produced.count(k) > 0; });
  };
  d.param_schema.fields = {
      {"merged_prompt", ParamType::String, true, {}, {}, {},
       "reduce prompt that also performs the map's per-document work"}};
  d.param_schema.validator = [](const Json& params, const ParamContext& ctx) {
    auto avail = available_keys_after(ctx.pipeline, size_t(ctx.span.start));
    return check_placeholders_within(params.at("merged_prompt").get<std::string>(), avail,
                                     "merged_prompt");
  };
  d.full_doc =
      "Collapses map -> reduce into one reduce keyed on the original group-by keys, keeping "
      "the reduce's output schema. The merged prompt must work from raw document keys (the "
      "map's intermediate outputs no longer exist). Precondition: the map's output schema "
      "does not contain the group-by keys.\n\nExample: map(extract factors) -> "
      "reduce(summarize by case_type) becomes reduce(extract and summarize by case_type).";
  d.apply_fn = [](const PipelineSpec& p, const RewriteRecord& r) {
    const auto& map_op = p.operators[r.match_span.start];
    const auto& reduce_op = p.operators[r.match_span.end];
    OperatorConfig fused;
    fused.type = OperatorType::Reduce;
    fused.id = fresh_operator_id(p, "fused_" + reduce_op.id);
    fused.prompt = require_string(r.params, "merged_prompt");
    fused.output_schema = reduce_op.output_schema;
    fused.group_by = reduce_op.group_by;
    fused.model = map_op.model;
    fused.extras = reduce_op.extras;
    add_rewrite_tag(fused, "fused");
    return replace_span(p, r.match_span, {std::move(fused)});
  };
  return d;
}

OperatorConfig make_flag_code_filter(const PipelineSpec& p, const std::string& bool_key) {
  OperatorConfig cf;
  cf.type = OperatorType::CodeFilter;
  cf.id = fresh_operator_id(p, "check_" + bool_key);
  cf.output_schema = {{bool_key, boolean_type()}};
  cf.code_body = "def keep(doc):\n    return bool(doc[\"" + bool_key + "\"])\n";
  cf.extras["predicate_key"] = bool_key;
  add_rewrite_tag(cf, "fused");
  return cf;
}

Directive make_map_filter_fusion() {
  Directive d;
  d.name = "map_filter_fusion";
  d.category = DirectiveCategory::FusionReordering;
  d.short_doc =
      "Expands a map to also compute the predicate of the following filter, then replaces "
      "the filter with a zero-cost code_filter that checks the produced boolean. Two LLM "
      "passes over each document become one.";
  d.lhs.signature = "map -> filter => map -> code_filter";
  d.lhs.elements = {{{OperatorType::Map}, nullptr}, {{OperatorType::Filter}, nullptr}};
  d.lhs.span_pred = [](const SpanMatch& m) {
    const auto& map_op = m.pipeline.operators[m.span.start];
    const auto& filter_op = m.pipeline.operators[m.span.end];
    return map_op.output_schema.count(filter_bool_key(filter_op)) == 0;
  };
  d.param_schema.fields = {
      {"merged_prompt", ParamType::String, true, {}, {}, {},
       "map prompt that also outputs the filter's boolean attribute"}};
  d.param_schema.validator = [](const Json& params, const ParamContext& ctx) {
    auto avail = available_keys_after(ctx.pipeline, size_t(ctx.span.start));
    return check_placeholders_within(params.at("merged_prompt").get<std::string>(), avail,
                                     "merged_prompt");
  };
  d.full_doc =
      "The rewritten map's output schema is the union of the original map schema and the "
      "filter's boolean key; the synthesized code_filter drops documents whose flag is "
      "false.\n\nExample: map(extract force incidents) -> filter(involves firearm?) becomes "
      "map(extract incidents and set involves_firearm) -> code_filter(involves_firearm).";
  d.apply_fn = [](const PipelineSpec& p, const RewriteRecord& r) {
    const auto& map_op = p.operators[r.match_span.start];
    const auto& filter_op = p.operators[r.match_span.end];
    const std::string& bool_key = filter_bool_key(filter_op);
    OperatorConfig fused = map_op;
    fused.id = fresh_operator_id(p, "fused_" + map_op.id);
    fused.prompt = require_string(r.params, "merged_prompt");
    fused.output_schema[bool_key] = boolean_type();
    add_rewrite_tag(fused, "fused");
    return replace_span(p, r.match_span, {std::move(fused), make_flag_code_filter(p, bool_key)});
  };
  return d;
}

Directive make_filter_map_fusion() {
  Directive d;
  d.name = "filter_map_fusion";
  d.category = DirectiveCategory::FusionReordering;
  d.short_doc =
      "Fuses filter and map logic into a single map that also emits the filter's boolean "
      "verdict, followed by a code_filter on that flag. Saves an LLM pass, but pulls the "
      "filter up: every document now flows through the fused map.";
  d.lhs.signature = "filter -> map => map -> code_filter";
  d.lhs.elements = {{{OperatorType::Filter}, nullptr}, {{OperatorType::Map}, nullptr}};
  d.lhs.span_pred = [](const SpanMatch& m) {
    const auto& filter_op = m.pipeline.operators[m.span.start];
    const auto& map_op = m.pipeline.operators[m.span.end];
    return map_op.output_schema.count(filter_bool_key(filter_op)) == 0;
  };
  d.param_schema.fields = {
      {"merged_prompt", ParamType::String, true, {}, {}, {},
       "map prompt that performs the transformation and evaluates the filter condition"}};
  d.param_schema.validator = [](const Json& params, const ParamContext& ctx) {
    auto avail = available_keys_after(ctx.pipeline, size_t(ctx.span.start));
    return check_placeholders_within(params.at("merged_prompt").get<std::string>(), avail,
                                     "merged_prompt");
  };
  d.full_doc =
      "Mirror image of map_filter_fusion for filter -> map pairs. The fused map's schema is "
      "the map schema plus the filter's boolean key; a synthesized code_filter then drops "
      "non-matching documents. May not pay off when the filter is very selective or runs on "
      "a much cheaper model than the map.";
  d.apply_fn = [](const PipelineSpec& p, const RewriteRecord& r) {
    const auto& filter_op = p.operators[r.match_span.start];
    const auto& map_op = p.operators[r.match_span.end];
    const std::string& bool_key = filter_bool_key(filter_op);
    OperatorConfig fused = map_op;
    fused.id = fresh_operator_id(p, "fused_" + map_op.id);
    fused.prompt = require_string(r.params, "merged_prompt");
    fused.output_schema[bool_key] = boolean_type();
    fused.model = filter_op.model;  // leftmost
    add_rewrite_tag(fused, "fused");
    return replace_span(p, r.match_span, {std::move(fused), make_flag_code_filter(p, bool_key)});
  };
  return d;
}

Directive make_reordering() {
  Directive d;
  d.name = "reordering";
  d.category = DirectiveCategory::FusionReordering;
  d.short_doc =
      "Swaps two adjacent commuting operators so the cheaper or more selective one runs "
      "first. Only valid when neither depends on the other's outputs.";
  d.lhs.signature = "a -> b => b -> a";
  const std::set<OperatorType> reorderable = {OperatorType::Map, OperatorType::ParallelMap,
                                              OperatorType::Filter, OperatorType::Extract,
                                              OperatorType::CodeMap, OperatorType::CodeFilter};
  d.lhs.elements = {{reorderable, nullptr}, {reorderable, nullptr}};
  // Conservative syntactic commutation test; the agent adapter may override
  // (relaxed_lhs) after verifying semantics itself.
  d.lhs.span_pred = [](const SpanMatch& m) {
    const auto& a = m.pipeline.operators[m.span.start];
    const auto& b = m.pipeline.operators[m.span.end];
    auto a_out = schema_keys(a.effective_schema());
    auto b_out = schema_keys(b.effective_schema());
    for (const auto& k : consumed_keys(b))
      if (a_out.count(k)) return false;
    for (const auto& k : consumed_keys(a))
      if (b_out.count(k)) return false;
    for (const auto& k : a_out)
      if (b_out.count(k)) return false;
    return true;
  };
  LhsPattern relaxed;
  relaxed.signature = d.lhs.signature;
  relaxed.elements = d.lhs.elements;
  d.relaxed_lhs = relaxed;
  d.param_schema.fields = {};  // the swap is fully determined by the site
  d.full_doc =
      "Exchanges the two operators in place. No parameters. The engine checks a conservative "
      "syntactic commutation condition (disjoint consumed/produced keys, no reduce "
      "boundary); an agent choosing this directive is expected to have verified semantic "
      "commutativity.\n\nExample: map(classify) -> code_filter(keyword screen) becomes "
      "code_filter(keyword screen) -> map(classify) so fewer documents reach the map.";
  d.apply_fn = [](const PipelineSpec& p, const RewriteRecord& r) {
    OperatorConfig a = p.operators[r.match_span.start];
    OperatorConfig b = p.operators[r.match_span.end];
    add_rewrite_tag(a, "reordered");
    add_rewrite_tag(b, "reordered");
    return replace_span(p, r.match_span, {std::move(b), std::move(a)});
  };
  return d;
}

OperatorType code_counterpart(OperatorType t) {
  switch (t) {
    case OperatorType::Map: return OperatorType::CodeMap;
    case OperatorType::Filter: return OperatorType::CodeFilter;
    case OperatorType::Reduce: return OperatorType::CodeReduce;
    default: fail(ErrorKind::Internal, "no code counterpart");
  }
}

Directive make_code_substitution() {
  Directive d;
  d.name = "code_substitution";
  d.category = DirectiveCategory::CodeSynthesis;
  d.short_doc =
      "Replaces an LLM-powered map, filter, or reduce with synthesized Python code that "
      "approximates the prompt's task. Drops the operator's cost to zero; best when the task "
      "reduces to pattern matching or mechanical aggregation.";
  d.lhs.signature = "op => code_op";
  d.lhs.elements = {
      {{OperatorType::Map, OperatorType::Filter, OperatorType::Reduce}, nullptr}};
  d.param_schema.fields = {
      {"code_body", ParamType::String, true, {}, {}, {},
       "Python function body implementing the operator's task"}};
  d.full_doc =
      "The code-powered twin keeps the output schema (and group-by keys for reduces) "
      "unchanged and carries no model. Synthesized code may use only the standard library "
      "and re.\n\nExample: map(does the report mention a firearm?) becomes code_map with a "
      "regex over weapon terms.";
  d.apply_fn = [](const PipelineSpec& p, const RewriteRecord& r) {
    OperatorConfig op = p.operators[r.match_span.start];
    op.type = code_counterpart(op.type);
    op.code_body = require_string(r.params, "code_body");
    op.prompt.clear();
    op.model.reset();
    add_rewrite_tag(op, "code_sub");
    return replace_span(p, r.match_span, {std::move(op)});
  };
  return d;
}

Directive make_code_sub_reduce() {
  Directive d;
  d.name = "code_sub_reduce";
  d.category = DirectiveCategory::CodeSynthesis;
  d.short_doc =
      "Splits a reduce into code-based aggregation (counting, grouping, concatenation) plus "
      "a map that handles the part genuinely needing an LLM, such as writing the narrative "
      "report from the aggregates.";
  d.lhs.signature = "reduce => code_reduce -> map";
  d.lhs.elements = {{{OperatorType::Reduce}, nullptr}};
  d.param_schema.fields = {
      {"code_body", ParamType::String, true, {}, {}, {}, "Python aggregation over each group"},
      {"aggregate_key", ParamType::String, true, {}, {}, {},
       "key under which the code_reduce exposes its aggregated data"},
      {"map_prompt", ParamType::String, true, {}, {}, {},
       "prompt turning the aggregates into the original output schema"}};
  d.param_schema.validator = [](const Json& params, const ParamContext& ctx) {
    const auto& reduce_op = ctx.pipeline.operators[ctx.span.start];
    std::set<std::string> allowed(reduce_op.group_by.begin(), reduce_op.group_by.end());
    allowed.insert(params.at("aggregate_key").get<std::string>());
    return check_placeholders_within(params.at("map_prompt").get<std::string>(), allowed,
                                     "map_prompt");
  };
  d.full_doc =
      "code_reduce groups by the original keys and emits structured aggregates under "
      "aggregate_key (list of strings); the trailing map consumes them and produces the "
      "original schema with the original model.\n\nExample: reduce(report common themes per "
      "officer) becomes code_reduce(count themes per officer) -> map(write the report from "
      "{{ input.aggregates }}).";
  d.apply_fn = [](const PipelineSpec& p, const RewriteRecord& r) {
    const auto& reduce_op = p.operators[r.match_span.start];
    const std::string agg_key = require_string(r.params, "aggregate_key");
    OperatorConfig agg;
    agg.type = OperatorType::CodeReduce;
    agg.id = reduce_op.id;
    agg.group_by = reduce_op.group_by;
    agg.output_schema = {{agg_key, ValueType{ValueKind::ListString, {}}}};
    agg.code_body = require_string(r.params, "code_body");
    add_rewrite_tag(agg, "code_sub_reduce");
    OperatorConfig narrate;
    narrate.type = OperatorType::Map;
    narrate.id = fresh_operator_id(p, reduce_op.id + "_narrate");
    narrate.prompt = require_string(r.params, "map_prompt");
    narrate.output_schema = reduce_op.output_schema;
    narrate.model = reduce_op.model;
    add_rewrite_tag(narrate, "code_sub_reduce");
    return replace_span(p, r.match_span, {std::move(agg), std::move(narrate)});
  };
  return d;
}

// Shared LHS for the "shrink the document before the operator" rewrites.
LhsPattern compressible_op_lhs(const std::string& signature) {
  LhsPattern lhs;
  lhs.signature = signature;
  lhs.elements = {{kLlmTypes, [](const OperatorConfig& op, const std::set<std::string>& avail) {
                     return has_doc_key(op, avail);
                   }}};
  return lhs;
}

std::string check_target_key(const Json& params, const ParamContext& ctx) {
  const auto& op = ctx.pipeline.operators[ctx.span.start];
  auto avail = available_keys_after(ctx.pipeline, size_t(ctx.span.start));
  std::string target = params.at("target_key").get<std::string>();
  auto refs = op.referenced_keys();
  if (std::find(refs.begin(), refs.end(), target) == refs.end() || !avail.count(target))
    return "target_key '" + target + "' must be a document key the operator reads";
  return "";
}

Directive make_doc_compression_code() {
  Directive d;
  d.name = "doc_compression_code";
  d.category = DirectiveCategory::CodeSynthesis;
  d.short_doc =
      "Inserts a synthesized code_map (regexes, keyword windows) that deterministically "
      "extracts only the relevant portions of the document before the downstream operator, "
      "shrinking its input at zero added LLM cost.";
  d.lhs = compressible_op_lhs("op => code_map -> op");
  d.param_schema.fields = {
      {"target_key", ParamType::String, true, {}, {}, {}, "document text key to compress"},
      {"code_body", ParamType::String, true, {}, {}, {}, "Python extraction code"},
      {"token_ratio", ParamType::Number, true, 0.01, 1.0, {},
       "estimated fraction of the text retained"}};
  d.param_schema.validator = [](const Json& params, const ParamContext& ctx) {
    return check_target_key(params, ctx);
  };
  d.param_sensitive = true;
  d.candidate_count = 2;
  d.full_doc =
      "The code_map rewrites target_key in place with the extracted content, so the "
      "downstream prompt is unchanged. Generate two implementations: one precision-oriented "
      "(strict patterns, low token_ratio) and one recall-oriented (broader patterns, higher "
      "token_ratio); both are evaluated and the more accurate wins.\n\nExample: before "
      "map(extract enhancement factors), a code_map keeps only paragraphs under 'Incident "
      "Details' headers.";
  d.apply_fn = [](const PipelineSpec& p, const RewriteRecord& r) {
    const auto& op = p.operators[r.match_span.start];
    std::string target = require_string(r.params, "target_key");
    OperatorConfig compress;
    compress.type = OperatorType::CodeMap;
    compress.id = fresh_operator_id(p, "compress_" + op.id);
    compress.output_schema = {{target, string_type()}};
    compress.code_body = require_string(r.params, "code_body");
    compress.extras["token_ratio"] = std::to_string(r.params.at("token_ratio").get<double>());
    add_rewrite_tag(compress, "code_compressed");
    return replace_span(p, r.match_span, {std::move(compress), op});
  };
  return d;
}

Directive make_head_tail_compression() {
  Directive d;
  d.name = "head_tail_compression";
  d.category = DirectiveCategory::CodeSynthesis;
  d.short_doc =
      "Retains only the first h and last l words of the document via a synthesized "
      "code_map. Cheap and effective when key information sits at document boundaries "
      "(abstract, conclusion, headers).";
  d.lhs = compressible_op_lhs("op => code_map -> op");
  d.param_schema.fields = {
      {"target_key", ParamType::String, true, {}, {}, {}, "document text key to truncate"},
      {"head_words", ParamType::Int, true, 0.0, 100000.0, {}, "words kept from the start"},
      {"tail_words", ParamType::Int, true, 0.0, 100000.0, {}, "words kept from the end"}};
  d.param_schema.validator = [](const Json& params, const ParamContext& ctx) {
    if (params.at("head_words").get<long long>() + params.at("tail_words").get<long long>() <= 0)
      return std::string("head_words + tail_words must be positive");
    return check_target_key(params, ctx);
  };
  d.param_sensitive = true;
  d.candidate_count = 2;
  d.full_doc =
      "Generate two configurations: shorter windows (e.g. h=100, l=50) optimizing cost and "
      "longer windows (e.g. h=300, l=150) optimizing recall; both are evaluated on the "
      "sample and the more accurate survives. The code_map rewrites target_key in place.";
  d.apply_fn = [](const PipelineSpec& p, const RewriteRecord& r) {
    const auto& op = p.operators[r.match_span.start];
    std::string target = require_string(r.params, "target_key");
    long long head = r.params.at("head_words").get<long long>();
    long long tail = r.params.at("tail_words").get<long long>();
    OperatorConfig truncate;
    truncate.type = OperatorType::CodeMap;
    truncate.id = fresh_operator_id(p, "head_tail_" + op.id);
    truncate.output_schema = {{target, string_type()}};
    std::ostringstream code;
    code << "def transform(doc):\n"
         << "    words = doc[\"" << target << "\"].split()\n"
         << "    head, tail = words[:" << head << "], words[-" << tail << ":] if " << tail
         << " else []\n"
         << "    return {\"" << target << "\": \" \".join(head + [\"...\"] + tail)}\n";
    truncate.code_body = code.str();
    truncate.extras["head_words"] = std::to_string(head);
    truncate.extras["tail_words"] = std::to_string(tail);
    add_rewrite_tag(truncate, "head_tail");
    return replace_span(p, r.match_span, {std::move(truncate), op});
  };
  return d;
}

std::string check_sampling_params(const Json& params, const ParamContext&) {
  std::string method = params.at("method").get<std::string>();
  bool needs_query = method == "bm25" || method == "embedding";
  bool has_query = params.contains("query") && !params.at("query").get<std::string>().empty();
  if (needs_query && !has_query) return "query required for " + method + " sampling";
  if (!needs_query && has_query) return "query only valid for bm25/embedding sampling";
  return "";
}

SamplingSpec sampling_from_params(const Json& params) {
  SamplingSpec s;
  s.method = sample_method_from_string(params.at("method").get<std::string>());
  s.k = int(params.at("k").get<long long>());
  if (params.contains("query")) s.query = params.at("query").get<std::string>();
  return s;
}

Directive make_chunk_sampling() {
  Directive d;
  d.name = "chunk_sampling";
  d.category = DirectiveCategory::DataDecomposition;
  d.short_doc =
      "After a split -> gather chunking prefix, samples the most relevant chunks (BM25 "
      "keyword query, embedding similarity, or random) before the map, so the LLM processes "
      "only chunks likely to matter.";
  d.lhs.signature = "split -> gather -> map -> reduce => split -> gather -> sample -> map -> reduce";
  d.lhs.elements = {{{OperatorType::Split}, nullptr},
                    {{OperatorType::Gather}, nullptr},
                    {{OperatorType::Map}, nullptr},
                    {{OperatorType::Reduce}, nullptr}};
  d.param_schema.fields = {
      {"method", ParamType::String, true, {}, {}, {"random", "bm25", "embedding"}, ""},
      {"k", ParamType::Int, true, 1.0, 1000000.0, {}, "chunks kept"},
      {"query", ParamType::String, false, {}, {}, {}, "relevance query (bm25/embedding)"}};
  d.param_schema.validator = check_sampling_params;
  d.param_sensitive = true;
  d.candidate_count = 2;
  d.full_doc =
      "Inserts a sample operator between gather and map. Generate two configurations: a "
      "precision-oriented one (stricter criteria, lower k, e.g. bm25 with k=10) and a "
      "recall-oriented one (broader criteria, higher k, e.g. embedding with k=30). Both are "
      "evaluated and the more accurate wins.\n\nExample: after splitting police reports, "
      "sample 20 chunks by BM25 query 'firearm weapon injury' before the extraction map.";
  d.apply_fn = [](const PipelineSpec& p, const RewriteRecord& r) {
    OperatorConfig sample;
    sample.type = OperatorType::Sample;
    sample.id = fresh_operator_id(p, "sample_chunks");
    sample.sampling = sampling_from_params(r.params);
    std::vector<OperatorConfig> ops;
    for (int i = r.match_span.start; i <= r.match_span.end; ++i) {
      ops.push_back(p.operators[i]);
      if (i == r.match_span.start + 1) ops.push_back(sample);
    }
    return replace_span(p, r.match_span, std::move(ops));
  };
  return d;
}

Directive make_doc_sampling() {
  Directive d;
  d.name = "doc_sampling";
  d.category = DirectiveCategory::DataDecomposition;
  d.short_doc =
      "Samples a subset of documents within each group (BM25, embedding, or random) before "
      "a reduce, cutting aggregation cost when groups contain many redundant or low-signal "
      "documents.";
  d.lhs.signature = "reduce => sample -> reduce";
  d.lhs.elements = {{{OperatorType::Reduce}, nullptr}};
  d.param_schema.fields = {
      {"method", ParamType::String, true, {}, {}, {"random", "bm25", "embedding"}, ""},
      {"k", ParamType::Int, true, 1.0, 1000000.0, {}, "documents kept per group"},
      {"query", ParamType::String, false, {}, {}, {}, "relevance query (bm25/embedding)"}};
  d.param_schema.validator = check_sampling_params;
  d.param_sensitive = true;
  d.candidate_count = 2;
  d.full_doc =
      "Inserts a per-group sample before the reduce (group keys taken from the reduce). "
      "Generate two configurations, precision-oriented (smaller k, stricter query) and "
      "recall-oriented (larger k, broader retrieval); both are evaluated and the more "
      "accurate wins.";
  d.apply_fn = [](const PipelineSpec& p, const RewriteRecord& r) {
    const auto& reduce_op = p.operators[r.match_span.start];
    OperatorConfig sample;
    sample.type = OperatorType::Sample;
    sample.id = fresh_operator_id(p, "sample_docs");
    sample.sampling = sampling_from_params(r.params);
    if (!reduce_op.group_by.empty())
      sample.extras["per_group_keys"] = join(reduce_op.group_by, ",");
    return replace_span(p, r.match_span, {std::move(sample), reduce_op});
  };
  return d;
}

Directive make_cascade_filtering() {
  Directive d;
  d.name = "cascade_filtering";
  d.category = DirectiveCategory::DataDecomposition;
  d.short_doc =
      "Inserts one or two cheaper pre-filters (deterministic code, then a cheap-model LLM "
      "filter) before an expensive filter. Pre-filters prioritize recall, discarding only "
      "documents that obviously cannot pass.";
  d.lhs.signature = "filter => [code_filter] -> [filter_cheap] -> filter";
  d.lhs.elements = {{{OperatorType::Filter}, nullptr}};
  d.param_schema.fields = {
      {"use_code_prefilter", ParamType::Bool, true, {}, {}, {}, ""},
      {"use_llm_prefilter", ParamType::Bool, true, {}, {}, {}, ""},
      {"code_body", ParamType::String, false, {}, {}, {}, "code pre-filter (high recall)"},
      {"llm_prompt", ParamType::String, false, {}, {}, {}, "short prompt for the cheap filter"},
      {"llm_model", ParamType::String, false, {}, {}, {}, "inexpensive model id"}};
  d.param_schema.validator = [](const Json& params, const ParamContext& ctx) -> std::string {
    bool use_code = params.at("use_code_prefilter").get<bool>();
    bool use_llm = params.at("use_llm_prefilter").get<bool>();
    if (!use_code && !use_llm) return "at least one pre-filter is required";
    if (use_code && (!params.contains("code_body") ||
                     params.at("code_body").get<std::string>().empty()))
      return "code_body required when use_code_prefilter";
    if (use_llm) {
      if (!params.contains("llm_prompt") || !params.contains("llm_model"))
        return "llm_prompt and llm_model required when use_llm_prefilter";
      if (ctx.catalog && !ctx.catalog->find(params.at("llm_model").get<std::string>()))
        return "llm_model '" + params.at("llm_model").get<std::string>() + "' not in catalog";
      auto avail = available_keys_after(ctx.pipeline, size_t(ctx.span.start));
      std::string err = check_placeholders_within(params.at("llm_prompt").get<std::string>(),
                                                  avail, "llm_prompt");
      if (!err.empty()) return err;
    }
    return "";
  };
  d.param_sensitive = true;
  d.candidate_count = 2;
  d.full_doc =
      "Builds a cascade in front of the original filter, cheapest stage first. Generate two "
      "configurations exploring different cascade compositions (code-only vs code + cheap "
      "LLM). Pre-filters must favor recall: a document the main filter would keep should "
      "rarely be dropped early.\n\nExample: code_filter(weapon keywords) -> filter[nano]"
      "('violent incident?') -> original filter.";
  d.apply_fn = [](const PipelineSpec& p, const RewriteRecord& r) {
    const auto& filter_op = p.operators[r.match_span.start];
    std::vector<OperatorConfig> ops;
    if (r.params.at("use_code_prefilter").get<bool>()) {
      OperatorConfig code;
      code.type = OperatorType::CodeFilter;
      code.id = fresh_operator_id(p, "prefilter_code_" + filter_op.id);
      code.output_schema = {{"passes_keyword_screen", boolean_type()}};
      code.code_body = require_string(r.params, "code_body");
      add_rewrite_tag(code, "cascade");
      ops.push_back(std::move(code));
    }
    if (r.params.at("use_llm_prefilter").get<bool>()) {
      OperatorConfig cheap;
      cheap.type = OperatorType::Filter;
      cheap.id = fresh_operator_id(p, "prefilter_llm_" + filter_op.id);
      cheap.prompt = require_string(r.params, "llm_prompt");
      cheap.output_schema = {{"passes_cheap_screen", boolean_type()}};
      cheap.model = require_string(r.params, "llm_model");
      add_rewrite_tag(cheap, "cascade");
      ops.push_back(std::move(cheap));
    }
    ops.push_back(filter_op);
    return replace_span(p, r.match_span, std::move(ops));
  };
  return d;
}

Directive make_doc_summarization() {
  Directive d;
  d.name = "doc_summarization";
  d.category = DirectiveCategory::ProjectionSynthesis;
  d.short_doc =
      "Inserts an LLM-written summary map before the operator and points the operator at "
      "the condensed text. Trades one extra cheap pass for much shorter downstream inputs.";
  d.lhs = compressible_op_lhs("op => map -> op");
  d.param_schema.fields = {
      {"target_key", ParamType::String, true, {}, {}, {}, "document text key to summarize"},
      {"summary_prompt", ParamType::String, true, {}, {}, {},
       "prompt producing a task-preserving summary"}};
  d.param_schema.validator = [](const Json& params, const ParamContext& ctx) -> std::string {
    std::string err = check_target_key(params, ctx);
    if (!err.empty()) return err;
    std::string target = params.at("target_key").get<std::string>();
    auto refs = prompt_placeholders(params.at("summary_prompt").get<std::string>());
    if (std::find(refs.begin(), refs.end(), target) == refs.end())
      return "summary_prompt must reference '{{ input." + target + " }}'";
    auto avail = available_keys_after(ctx.pipeline, size_t(ctx.span.start));
    return check_placeholders_within(params.at("summary_prompt").get<std::string>(), avail,
                                     "summary_prompt");
  };
  d.full_doc =
      "The inserted map writes its summary to <target_key>_summary and the downstream "
      "operator's placeholders are rewritten to reference it. The summary prompt must "
      "preserve the information the downstream task needs.\n\nExample: before map(extract "
      "sustainability initiatives), insert map(summarize the report focusing on "
      "environmental commitments).";
  d.apply_fn = [](const PipelineSpec& p, const RewriteRecord& r) {
    OperatorConfig op = p.operators[r.match_span.start];
    std::string target = require_string(r.params, "target_key");
    std::string summary_key = target + "_summary";
    OperatorConfig summarize;
    summarize.type = OperatorType::Map;
    summarize.id = fresh_operator_id(p, "summarize_" + target);
    summarize.prompt = require_string(r.params, "summary_prompt");
    summarize.output_schema = {{summary_key, string_type()}};
    summarize.model = op.model;
    add_rewrite_tag(summarize, "summarized");
    remap_all_placeholders(op, target, summary_key);
    return replace_span(p, r.match_span, {std::move(summarize), std::move(op)});
  };
  return d;
}

Directive make_doc_compression_llm() {
  Directive d;
  d.name = "doc_compression_llm";
  d.category = DirectiveCategory::ProjectionSynthesis;
  d.short_doc =
      "Inserts an extract operator that returns relevant text spans from the original "
      "document (an exact subset, unlike a summary) and points the downstream operator at "
      "the compressed content.";
  d.lhs = compressible_op_lhs("op => extract -> op");
  d.param_schema.fields = {
      {"target_key", ParamType::String, true, {}, {}, {}, "document text key to compress"},
      {"extraction_prompt", ParamType::String, true, {}, {}, {},
       "prompt asking for the relevant line ranges"}};
  d.param_schema.validator = [](const Json& params, const ParamContext& ctx) -> std::string {
    std::string err = check_target_key(params, ctx);
    if (!err.empty()) return err;
    std::string target = params.at("target_key").get<std::string>();
    auto refs = prompt_placeholders(params.at("extraction_prompt").get<std::string>());
    if (std::find(refs.begin(), refs.end(), target) == refs.end())
      return "extraction_prompt must reference '{{ input." + target + " }}'";
    auto avail = available_keys_after(ctx.pipeline, size_t(ctx.span.start));
    return check_placeholders_within(params.at("extraction_prompt").get<std::string>(), avail,
                                     "extraction_prompt");
  };
  d.full_doc =
      "The extract operator sees the document with line numbers and answers with ranges "
      "('lines 45-67'); only those lines are kept, under <target_key>_extract. Output tokens "
      "stay tiny because only ranges are generated. The downstream operator's placeholders "
      "are rewritten to the extracted key.";
  d.apply_fn = [](const PipelineSpec& p, const RewriteRecord& r) {
    OperatorConfig op = p.operators[r.match_span.start];
    std::string target = require_string(r.params, "target_key");
    std::string extract_key = target + "_extract";
    OperatorConfig extract;
    extract.type = OperatorType::Extract;
    extract.id = fresh_operator_id(p, "extract_" + target);
    extract.prompt = require_string(r.params, "extraction_prompt");
    extract.output_schema = {{extract_key, string_type()}};
    extract.model = op.model;
    add_rewrite_tag(extract, "llm_extracted");
    remap_all_placeholders(op, target, extract_key);
    return replace_span(p, r.match_span, {std::move(extract), std::move(op)});
  };
  return d;
}

Directive make_model_substitution() {
  Directive d;
  d.name = "model_substitution";
  d.category = DirectiveCategory::LlmCentric;
  d.short_doc =
      "Replaces an operator's LLM with a different model from the pool. Use model "
      "statistics to pick cheaper models for mechanical steps and stronger models for "
      "nuanced interpretation.";
  d.lhs.signature = "op[m] => op[m']";
  d.lhs.elements = {{kLlmTypes, nullptr}};
  d.param_schema.fields = {
      {"model", ParamType::String, true, {}, {}, {}, "replacement model id"}};
  d.param_schema.validator = [](const Json& params, const ParamContext& ctx) -> std::string {
    std::string model = params.at("model").get<std::string>();
    if (ctx.catalog && !ctx.catalog->find(model))
      return "model '" + model + "' not in catalog";
    const auto& op = ctx.pipeline.operators[ctx.span.start];
    if (op.model && *op.model == model) return "model '" + model + "' is already in use";
    return "";
  };
  d.full_doc =
      "Swaps the model field of the targeted operator, keeping prompt and schema. Consult "
      "per-model cost/accuracy statistics from initialization plus context window sizes and "
      "prices.\n\nExample: map[gpt-4o] => map[gpt-4o-mini] for plain span extraction.";
  d.apply_fn = [](const PipelineSpec& p, const RewriteRecord& r) {
    OperatorConfig op = p.operators[r.match_span.start];
    op.model = require_string(r.params, "model");
    return replace_span(p, r.match_span, {std::move(op)});
  };
  return d;
}

Directive make_clarify_instructions() {
  Directive d;
  d.name = "clarify_instructions";
  d.category = DirectiveCategory::LlmCentric;
  d.short_doc =
      "Rewrites the prompt template to be more specific and detailed, spelling out "
      "ambiguous terminology and expected edge-case handling so cheaper models execute the "
      "task reliably.";
  d.lhs.signature = "op[p] => op[p']";
  d.lhs.elements = {{kPromptedTypes, nullptr}};
  d.param_schema.fields = {
      {"clarified_prompt", ParamType::String, true, {}, {}, {},
       "rewritten prompt; must preserve every original placeholder"}};
  d.param_schema.validator = [](const Json& params, const ParamContext& ctx) -> std::string {
    const auto& op = ctx.pipeline.operators[ctx.span.start];
    std::string clarified = params.at("clarified_prompt").get<std::string>();
    auto new_refs = prompt_placeholders(clarified);
    for (const auto& k : prompt_placeholders(op.prompt)) {
      if (std::find(new_refs.begin(), new_refs.end(), k) == new_refs.end())
        return "clarified_prompt must preserve '{{ input." + k + " }}'";
    }
    auto avail = available_keys_after(ctx.pipeline, size_t(ctx.span.start));
    return check_placeholders_within(clarified, avail, "clarified_prompt");
  };
  d.param_sensitive = true;
  d.candidate_count = 2;
  d.full_doc =
      "Generate two clarified prompts exploring different clarification strategies (e.g. "
      "enumerate qualifying conditions vs pin down output formatting); both are evaluated "
      "and the more accurate wins. All input placeholders must survive the rewrite.";
  d.apply_fn = [](const PipelineSpec& p, const RewriteRecord& r) {
    OperatorConfig op = p.operators[r.match_span.start];
    op.prompt = require_string(r.params, "clarified_prompt");
    add_rewrite_tag(op, "clarified");
    return replace_span(p, r.match_span, {std::move(op)});
  };
  return d;
}

Directive make_few_shot_examples() {
  Directive d;
  d.name = "few_shot_examples";
  d.category = DirectiveCategory::LlmCentric;
  d.short_doc =
      "Appends few-shot examples to the prompt demonstrating desired input-output behavior, "
      "grounded in sample documents.";
  d.lhs.signature = "op[p] => op[p + examples]";
  d.lhs.elements = {{kPromptedTypes, nullptr}};
  d.param_schema.fields = {
      {"examples_block", ParamType::String, true, {}, {}, {},
       "formatted examples appended to the prompt"}};
  d.full_doc =
      "The examples block is appended under an 'Examples:' header. Derive examples from "
      "sample documents via read_next_doc() where possible, keeping them short and "
      "representative.";
  d.apply_fn = [](const PipelineSpec& p, const RewriteRecord& r) {
    OperatorConfig op = p.operators[r.match_span.start];
    op.prompt += "\n\nExamples:\n" + require_string(r.params, "examples_block");
    add_rewrite_tag(op, "few_shot");
    return replace_span(p, r.match_span, {std::move(op)});
  };
  return d;
}

Directive make_arbitrary_rewrite() {
  Directive d;
  d.name = "arbitrary_rewrite";
  d.category = DirectiveCategory::LlmCentric;
  d.short_doc =
      "Free-form pipeline transformation expressed as search-and-replace edits over the "
      "pipeline YAML, for beneficial rewrites no structured directive captures.";
  d.lhs.signature = "P => P'";
  d.lhs.whole_pipeline = true;
  d.param_schema.fields = {
      {"edits", ParamType::EditList, true, {}, {}, {},
       "ordered search/replace blocks; each search string must be unique in the YAML"}};
  d.param_schema.validator = [](const Json& params, const ParamContext& ctx) -> std::string {
    std::string yaml = pipeline_to_yaml(ctx.pipeline);
    for (const auto& e : params.at("edits")) {
      std::string search = e.at("search").get<std::string>();
      size_t n = count_occurrences(yaml, search);
      if (n == 0) return "search string not found in pipeline YAML: '" + search + "'";
      if (n > 1) return "search string is ambiguous (" + std::to_string(n) + " matches): '" +
                        search + "'";
    }
    return "";
  };
  d.full_doc =
      "Edits are applied in order to the canonical pipeline YAML; the result is re-parsed "
      "and re-validated, and any failure is reported back for refinement. Each search "
      "string must match exactly once.\n\nExample edit: {search: 'prompt: Classify the "
      "sector', replace: 'prompt: Classify the sector; use the report header if present'}.";
  d.apply_fn = [](const PipelineSpec& p, const RewriteRecord& r) {
    std::string yaml = pipeline_to_yaml(p);
    for (const auto& e : r.params.at("edits")) {
      std::string search = e.at("search").get<std::string>();
      size_t n = count_occurrences(yaml, search);
      if (n != 1)
        fail(ErrorKind::InvalidParams,
             "arbitrary_rewrite: search string must match exactly once, got " +
                 std::to_string(n) + ": '" + search + "'");
      replace_all(yaml, search, e.at("replace").get<std::string>());
    }
    try {
      return pipeline_from_yaml(yaml);
    } catch (const Error& e) {
      fail(ErrorKind::RewriteInvalid,
           std::string("arbitrary_rewrite produced unparseable YAML: ") + e.what());
    }
  };
  return d;
}

Directive make_doc_chunking() {
  Directive d;
  d.name = "doc_chunking";
  d.category = DirectiveCategory::DataDecomposition;
  d.short_doc =
      "Splits the largest text field of each document into chunks, gathers peripheral "
      "context around each chunk, maps over the chunks, and aggregates results with a newly "
      "synthesized reduce. The standard fix when documents exceed the model's effective "
      "context.";
  d.lhs.signature = "map => split -> gather -> map' -> reduce";
  d.lhs.elements = {{{OperatorType::Map},
                     [](const OperatorConfig& op, const std::set<std::string>& avail) {
                       if (!has_doc_key(op, avail)) return false;
                       // need a surviving key to group chunks back into documents
                       auto target = first_doc_key(op, avail);
                       return std::any_of(avail.begin(), avail.end(), [&](const std::string& k) {
                         return k != *target;
                       });
                     }}};
  d.lhs.span_pred = [](const SpanMatch& m) {
    // Everything downstream must survive on the reduce's outputs (the map
    // schema) plus one group key.
    const auto& map_op = m.pipeline.operators[m.span.start];
    auto surviving = schema_keys(map_op.output_schema);
    std::set<std::string> extra;
    for (const auto& k : downstream_consumed(m.pipeline, m.span.end))
      if (!surviving.count(k)) extra.insert(k);
    if (extra.size() > 1) return false;
    return extra.empty() || m.keys_before.count(*extra.begin()) > 0;
  };
  d.param_schema.fields = {
      {"target_key", ParamType::String, true, {}, {}, {}, "text key to split into chunks"},
      {"chunk_size", ParamType::Int, true, 1.0, 10000000.0, {}, "tokens per chunk"},
      {"context_chunks", ParamType::Int, true, 0.0, 100.0, {},
       "peripheral chunks gathered on each side"},
      {"group_key", ParamType::String, true, {}, {}, {},
       "key identifying the source document, used to regroup chunk results"},
      {"reduce_prompt", ParamType::String, true, {}, {}, {},
       "prompt aggregating chunk-level outputs"}};
  d.param_schema.validator = [](const Json& params, const ParamContext& ctx) -> std::string {
    std::string err = check_target_key(params, ctx);
    if (!err.empty()) return err;
    const auto& map_op = ctx.pipeline.operators[ctx.span.start];
    std::string target = params.at("target_key").get<std::string>();
    std::string group_key = params.at("group_key").get<std::string>();
    auto avail = available_keys_after(ctx.pipeline, size_t(ctx.span.start));
    if (group_key == target || !avail.count(group_key))
      return "group_key must be an available key other than target_key";
    std::set<std::string> reduce_view = schema_keys(map_op.output_schema);
    reduce_view.insert(group_key);
    reduce_view.insert(target + "_chunk");
    return check_placeholders_within(params.at("reduce_prompt").get<std::string>(), reduce_view,
                                     "reduce_prompt");
  };
  d.full_doc =
      "Chunks flow as documents: split replaces target_key with <target_key>_chunk, gather "
      "adds context_chunks of surrounding text on each side, the original map runs per "
      "chunk (its placeholders are rewritten to the chunk key), and a synthesized reduce "
      "groups by group_key to merge chunk-level results into the original schema.\n\n"
      "Example: map(extract factors from {{ input.notes }}) becomes split(notes, 1000) -> "
      "gather(1) -> map(extract factors from {{ input.notes_chunk }}) -> reduce(by case_id, "
      "merge factor lists).";
  d.apply_fn = [](const PipelineSpec& p, const RewriteRecord& r) {
    const auto& map_op = p.operators[r.match_span.start];
    std::string target = require_string(r.params, "target_key");
    std::string chunk_key = target + "_chunk";
    long long chunk_size = r.params.at("chunk_size").get<long long>();
    long long context = r.params.at("context_chunks").get<long long>();

    OperatorConfig split;
    split.type = OperatorType::Split;
    split.id = fresh_operator_id(p, "split_" + target);
    split.extras["split_key"] = target;
    split.extras["chunk_size"] = std::to_string(chunk_size);
    split.extras["chunk_key_out"] = chunk_key;

    OperatorConfig gather;
    gather.type = OperatorType::Gather;
    gather.id = fresh_operator_id(p, "gather_" + target);
    gather.extras["context_before"] = std::to_string(context);
    gather.extras["context_after"] = std::to_string(context);

    OperatorConfig chunk_map = map_op;
    remap_all_placeholders(chunk_map, target, chunk_key);

    OperatorConfig combine;
    combine.type = OperatorType::Reduce;
    combine.id = fresh_operator_id(p, "combine_" + map_op.id);
    combine.group_by = {require_string(r.params, "group_key")};
    combine.prompt = require_string(r.params, "reduce_prompt");
    combine.output_schema = map_op.output_schema;
    combine.model = map_op.model;

    return replace_span(p, r.match_span,
                        {std::move(split), std::move(gather), std::move(chunk_map),
                         std::move(combine)});
  };
  return d;
}

}  // namespace

Registry build_registry() {
  Registry reg;
  reg.directives_.push_back(make_same_type_fusion());
  reg.directives_.push_back(make_map_reduce_fusion());
  reg.directives_.push_back(make_map_filter_fusion());
  reg.directives_.push_back(make_filter_map_fusion());
  reg.directives_.push_back(make_reordering());
  reg.directives_.push_back(make_code_substitution());
  reg.directives_.push_back(make_code_sub_reduce());
  reg.directives_.push_back(make_doc_compression_code());
  reg.directives_.push_back(make_head_tail_compression());
  reg.directives_.push_back(make_chunk_sampling());
  reg.directives_.push_back(make_doc_sampling());
  reg.directives_.push_back(make_cascade_filtering());
  reg.directives_.push_back(make_doc_summarization());
  reg.directives_.push_back(make_doc_compression_llm());
  reg.directives_.push_back(make_model_substitution());
  reg.directives_.push_back(make_clarify_instructions());
  reg.directives_.push_back(make_few_shot_examples());
  reg.directives_.push_back(make_arbitrary_rewrite());
  reg.directives_.push_back(make_doc_chunking());
  return reg;
}

const Registry& Registry::builtin() {
  static const Registry reg = build_registry();
  return reg;
}

}  // namespace moar
