#include "directives.hpp"

#include <algorithm>
#include <sstream>

#include "errors.hpp"
#include "util.hpp"

namespace moar {

const char* to_string(DirectiveCategory c) {
  switch (c) {
    case DirectiveCategory::FusionReordering: return "fusion_reordering";
    case DirectiveCategory::CodeSynthesis: return "code_synthesis";
    case DirectiveCategory::DataDecomposition: return "data_decomposition";
    case DirectiveCategory::ProjectionSynthesis: return "projection_synthesis";
    case DirectiveCategory::LlmCentric: return "llm_centric";
  }
  return "?";
}

const char* to_string(Objective o) {
  return o == Objective::ImproveAccuracy ? "improve_accuracy" : "reduce_cost";
}

// ---------------------------------------------------------------------------
// Pattern matching
// ---------------------------------------------------------------------------

std::vector<Span> match_sites(const Directive& d, const PipelineSpec& p, bool agent_override) {
  const LhsPattern& pattern =
      agent_override && d.relaxed_lhs ? *d.relaxed_lhs : d.lhs;
  std::vector<Span> sites;
  const int n = int(p.operators.size());
  if (pattern.whole_pipeline) {
    if (n > 0) sites.push_back({0, n - 1});
    return sites;
  }
  const int m = int(pattern.elements.size());
  if (m == 0 || m > n) return sites;
  std::set<std::string> keys = p.input_keys;
  for (int start = 0; start + m <= n; ++start) {
    std::set<std::string> cursor = keys;
    bool matched = true;
    for (int j = 0; j < m && matched; ++j) {
      const OperatorConfig& op = p.operators[start + j];
      const LhsElement& el = pattern.elements[j];
      if (!el.types.empty() && !el.types.count(op.type)) matched = false;
      else if (el.pred && !el.pred(op, cursor)) matched = false;
      if (matched && j + 1 < m) {
        // advance key threading for the next element's availability view
        cursor = available_keys_after(p, size_t(start + j + 1));
      }
    }
    if (matched && pattern.span_pred) {
      matched = pattern.span_pred({p, Span{start, start + m - 1}, keys});
    }
    if (matched) sites.push_back({start, start + m - 1});
    keys = available_keys_after(p, size_t(start + 1));
  }
  return sites;
}

// ---------------------------------------------------------------------------
// Parameter schema validation
// ---------------------------------------------------------------------------

namespace {

std::string type_name(ParamType t) {
  switch (t) {
    case ParamType::String: return "string";
    case ParamType::Int: return "integer";
    case ParamType::Number: return "number";
    case ParamType::Bool: return "boolean";
    case ParamType::StringList: return "list of strings";
    case ParamType::EditList: return "list of {search, replace} objects";
  }
  return "?";
}

std::string check_field(const ParamField& f, const Json& v) {
  switch (f.type) {
    case ParamType::String:
      if (!v.is_string()) return "must be a string";
      if (v.get<std::string>().empty()) return "must be non-empty";
      if (!f.allowed.empty() &&
          std::find(f.allowed.begin(), f.allowed.end(), v.get<std::string>()) ==
              f.allowed.end())
        return "must be one of: " + join(f.allowed, ", ");
      break;
    case ParamType::Int: {
      if (!v.is_number_integer()) return "must be an integer";
      double d = v.get<double>();
      if (f.min_value && d < *f.min_value) return "below minimum " + std::to_string(*f.min_value);
      if (f.max_value && d > *f.max_value) return "above maximum " + std::to_string(*f.max_value);
      break;
    }
    case ParamType::Number: {
      if (!v.is_number()) return "must be a number";
      double d = v.get<double>();
      if (f.min_value && d < *f.min_value) return "below minimum " + std::to_string(*f.min_value);
      if (f.max_value && d > *f.max_value) return "above maximum " + std::to_string(*f.max_value);
      break;
    }
    case ParamType::Bool:
      if (!v.is_boolean()) return "must be a boolean";
      break;
    case ParamType::StringList:
      if (!v.is_array()) return "must be an array of strings";
      for (const auto& e : v)
        if (!e.is_string()) return "must be an array of strings";
      break;
    case ParamType::EditList:
      if (!v.is_array() || v.empty()) return "must be a non-empty array";
      for (const auto& e : v) {
        if (!e.is_object() || !e.contains("search") || !e.contains("replace") ||
            !e["search"].is_string() || !e["replace"].is_string())
          return "each entry needs string fields 'search' and 'replace'";
        if (e["search"].get<std::string>().empty()) return "'search' must be non-empty";
      }
      break;
  }
  return "";
}

}  // namespace

std::string ParamSchema::validate(const Json& params, const ParamContext& ctx) const {
  if (!params.is_object()) return "params must be a JSON object";
  for (const auto& f : fields) {
    if (!params.contains(f.name)) {
      if (f.required) return "missing required parameter '" + f.name + "'";
      continue;
    }
    std::string err = check_field(f, params[f.name]);
    if (!err.empty()) return "parameter '" + f.name + "' " + err;
  }
  for (auto it = params.begin(); it != params.end(); ++it) {
    bool known = std::any_of(fields.begin(), fields.end(),
                             [&](const ParamField& f) { return f.name == it.key(); });
    if (!known) return "unknown parameter '" + it.key() + "'";
  }
  if (validator) return validator(params, ctx);
  return "";
}

std::string ParamSchema::describe() const {
  std::ostringstream os;
  for (const auto& f : fields) {
    os << "- " << f.name << " (" << type_name(f.type) << (f.required ? ", required" : ", optional")
       << ")";
    if (f.min_value || f.max_value) {
      os << " range[";
      if (f.min_value) os << *f.min_value;
      os << ", ";
      if (f.max_value) os << *f.max_value;
      os << "]";
    }
    if (!f.allowed.empty()) os << " one of {" << join(f.allowed, ", ") << "}";
    if (!f.doc.empty()) os << ": " << f.doc;
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// apply
// ---------------------------------------------------------------------------

PipelineSpec apply(const Directive& d, const PipelineSpec& p, const RewriteRecord& r,
                   const ModelCatalog* catalog) {
  ParamContext ctx{p, r.match_span, catalog};
  std::string err = d.param_schema.validate(r.params, ctx);
  if (!err.empty())
    fail(ErrorKind::InvalidParams, d.name + ": " + err);
  auto sites = match_sites(d, p, /*agent_override=*/true);
  auto strict = match_sites(d, p, /*agent_override=*/false);
  bool at_site = std::find(strict.begin(), strict.end(), r.match_span) != strict.end() ||
                 std::find(sites.begin(), sites.end(), r.match_span) != sites.end();
  if (!at_site)
    fail(ErrorKind::InvalidParams,
         d.name + ": span [" + std::to_string(r.match_span.start) + "," +
             std::to_string(r.match_span.end) + "] is not a match site");
  PipelineSpec out = d.apply_fn(p, r);
  ValidationReport report = validate_pipeline(out);
  if (!report.ok())
    fail(ErrorKind::RewriteInvalid, d.name + " produced an invalid pipeline:\n" + report.to_string());
  return out;
}

// ---------------------------------------------------------------------------
// prune_registry
// ---------------------------------------------------------------------------

namespace {

const std::set<std::string>& fusion_directives() {
  static const std::set<std::string> s = {
      "same_type_fusion", "map_reduce_fusion", "map_filter_fusion", "filter_map_fusion"};
  return s;
}

// Directives whose RHS chains new stages onto the pipeline; a fusion right
// after one of these would re-collapse what was just introduced.
const std::set<std::string>& chaining_directives() {
  static const std::set<std::string> s = {
      "doc_chunking", "code_sub_reduce", "doc_summarization", "doc_compression_llm",
      "doc_compression_code"};
  return s;
}

const std::set<std::string>& compression_directives() {
  static const std::set<std::string> s = {
      "doc_compression_code", "head_tail_compression", "doc_summarization",
      "doc_compression_llm"};
  return s;
}

}  // namespace

std::vector<const Directive*> prune_registry(const PipelineSpec& p_star,
                                             const std::vector<RewriteRecord>& path,
                                             const std::vector<const Directive*>& registry) {
  const std::string last_action = path.empty() ? "" : path.back().directive_name;
  const size_t depth = path.size();
  const bool has_split = std::any_of(
      p_star.operators.begin(), p_star.operators.end(),
      [](const OperatorConfig& op) { return op.type == OperatorType::Split; });

  std::vector<const Directive*> kept;
  for (const Directive* d : registry) {
    // (i) cycles: chaining rewrite immediately followed by a fusion
    if (fusion_directives().count(d->name) && chaining_directives().count(last_action)) continue;
    // (ii) cycles: model substitution at a first-layer node only revisits models
    if (d->name == "model_substitution" && depth == 1) continue;
    // (iii) no-ops: chunking an already chunked pipeline
    if (d->name == "doc_chunking" && has_split) continue;
    // (iv) no-ops: consecutive compression/summarization rewrites
    if (compression_directives().count(d->name) && compression_directives().count(last_action))
      continue;
    kept.push_back(d);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Registry plumbing
// ---------------------------------------------------------------------------

const Directive* Registry::find(const std::string& name) const {
  for (const auto& d : directives_)
    if (d.name == name) return &d;
  return nullptr;
}

std::vector<const Directive*> Registry::pointers() const {
  std::vector<const Directive*> out;
  out.reserve(directives_.size());
  for (const auto& d : directives_) out.push_back(&d);
  return out;
}

Json Registry::dump() const {
  Json arr = Json::array();
  for (const auto& d : directives_) {
    arr.push_back({{"name", d.name},
                   {"category", to_string(d.category)},
                   {"short_doc", d.short_doc},
                   {"lhs", d.lhs.signature},
                   {"param_sensitive", d.param_sensitive},
                   {"candidate_count", d.candidate_count}});
  }
  return arr;
}

// ---------------------------------------------------------------------------
// Helpers shared with apply bodies
// ---------------------------------------------------------------------------

std::string fresh_operator_id(const PipelineSpec& p, const std::string& base) {
  auto taken = [&](const std::string& id) {
    return std::any_of(p.operators.begin(), p.operators.end(),
                       [&](const OperatorConfig& op) { return op.id == id; });
  };
  if (!taken(base)) return base;
  for (int i = 2;; ++i) {
    std::string candidate = base + "_" + std::to_string(i);
    if (!taken(candidate)) return candidate;
  }
}

void add_rewrite_tag(OperatorConfig& op, const std::string& tag) {
  std::vector<std::string> tags = split_csv(op.extras["tags"]);
  if (std::find(tags.begin(), tags.end(), tag) == tags.end()) tags.push_back(tag);
  std::sort(tags.begin(), tags.end());
  op.extras["tags"] = join(tags, ",");
}

std::set<std::string> rewrite_features(const PipelineSpec& p) {
  std::set<std::string> features;
  for (const auto& op : p.operators) {
    auto it = op.extras.find("tags");
    if (it != op.extras.end())
      for (const auto& t : split_csv(it->second)) features.insert(t);
    if (op.type == OperatorType::Split) features.insert("chunked");
    if (op.type == OperatorType::Sample) features.insert("sampled");
  }
  return features;
}

int llm_call_count(const PipelineSpec& p) {
  int count = 0;
  for (const auto& op : p.operators) {
    if (!is_llm(op.type)) continue;
    count += op.type == OperatorType::ParallelMap ? int(op.branches.size()) : 1;
  }
  return count;
}

}  // namespace moar
