#include "instantiate.hpp"

#include <algorithm>
#include <sstream>

#include "errors.hpp"
#include "util.hpp"

namespace moar {

JsonlDocPeek::JsonlDocPeek(const std::string& jsonl_text) {
  std::istringstream in(jsonl_text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    docs_.push_back(Json::parse(line));
  }
}

std::optional<Json> JsonlDocPeek::read_next_doc() {
  if (next_ >= docs_.size()) return std::nullopt;
  return docs_[next_++];
}

// ---------------------------------------------------------------------------
// Stub choose
// ---------------------------------------------------------------------------

StubInstantiator::StubInstantiator(ModelCatalog catalog, uint64_t seed)
    : catalog_(std::move(catalog)), seed_(seed) {
  (void)seed_;  // reserved; every stub rule is currently deterministic
}

namespace {

double model_price(const ModelInfo& m) {
  return m.input_price_per_token + m.output_price_per_token;
}

const ModelInfo* cheapest_model_where(
    const ModelCatalog& catalog, const std::function<bool(const ModelInfo&)>& keep) {
  const ModelInfo* best = nullptr;
  for (const auto& m : catalog.entries) {
    if (!keep(m)) continue;
    if (!best || model_price(m) < model_price(*best) ||
        (model_price(m) == model_price(*best) && m.model_id < best->model_id))
      best = &m;
  }
  return best;
}

std::vector<std::vector<std::string>> preference_tiers(Objective objective) {
  if (objective == Objective::ReduceCost) {
    return {{"model_substitution"},
            {"same_type_fusion", "map_reduce_fusion", "map_filter_fusion", "filter_map_fusion"},
            {"code_substitution", "code_sub_reduce", "doc_compression_code",
             "head_tail_compression"}};
  }
  return {{"clarify_instructions", "doc_chunking", "few_shot_examples"}};
}

// Strip placeholders for the given keys down to plain text mentions.
std::string strip_keys(const std::string& prompt, const std::set<std::string>& keys) {
  std::string out = prompt;
  for (const auto& k : keys) {
    replace_all(out, "{{ input." + k + " }}", "the " + k);
    replace_all(out, "{{input." + k + "}}", "the " + k);
  }
  return out;
}

std::set<std::string> schema_key_set(const Schema& s) {
  std::set<std::string> keys;
  for (const auto& [k, v] : s) keys.insert(k);
  return keys;
}

// First prompt placeholder naming an available key; the "document" field the
// compression rewrites target.
std::string doc_key_for(const OperatorConfig& op, const PipelineSpec& p, int index) {
  auto avail = available_keys_after(p, size_t(index));
  for (const auto& k : op.referenced_keys())
    if (avail.count(k)) return k;
  fail(ErrorKind::Internal, "operator '" + op.id + "' reads no available document key");
}

// A short relevance query: the prompt with placeholders flattened, first 8 words.
std::string query_from_prompt(const std::string& prompt) {
  std::string flat = prompt;
  // remove placeholder syntax wholesale
  while (true) {
    size_t open = flat.find("{{");
    if (open == std::string::npos) break;
    size_t close = flat.find("}}", open);
    if (close == std::string::npos) break;
    flat.erase(open, close + 2 - open);
  }
  std::istringstream in(flat);
  std::vector<std::string> words;
  std::string w;
  while (in >> w && words.size() < 8) {
    std::string cleaned;
    for (char c : w)
      if (std::isalnum(static_cast<unsigned char>(c))) cleaned.push_back(char(std::tolower(c)));
    if (cleaned.size() > 2) words.push_back(cleaned);
  }
  if (words.empty()) words.push_back("relevant");
  return join(words, " ");
}

std::string default_value_literal(const ValueType& t) {
  switch (t.kind) {
    case ValueKind::String: return "\"\"";
    case ValueKind::Number: return "0";
    case ValueKind::Boolean: return "False";
    case ValueKind::ListString: return "[]";
    case ValueKind::ListObject: return "[]";
  }
  return "None";
}

// Deterministic arbitrary-rewrite edit: append a nudge to the first prompt we
// can target with an unambiguous search window in the emitted YAML.
Json stub_yaml_edit(const PipelineSpec& p) {
  std::string yaml = pipeline_to_yaml(p);
  for (const auto& op : p.operators) {
    if (op.prompt.empty()) continue;
    // longest run of quoting-safe characters in the prompt
    std::string window, current;
    for (char c : op.prompt) {
      if (std::isalnum(static_cast<unsigned char>(c)) || c == ' ' || c == ',' || c == '.') {
        current.push_back(c);
        if (current.size() > window.size()) window = current;
      } else {
        current.clear();
      }
    }
    if (window.size() < 12) continue;
    if (count_occurrences(yaml, window) != 1) continue;
    Json edits = Json::array();
    edits.push_back({{"search", window}, {"replace", window + " (be thorough)"}});
    return edits;
  }
  // fall back to renaming the first operator id; semantically a no-op but
  // always a valid edit
  std::string needle = "id: " + p.operators.front().id;
  Json edits = Json::array();
  edits.push_back({{"search", needle},
                   {"replace", "id: " + fresh_operator_id(p, p.operators.front().id + "_alt")}});
  return edits;
}

std::string code_template(const OperatorConfig& op, const std::string& flavor) {
  std::ostringstream code;
  std::string task = strip_keys(op.prompt, {});
  if (task.size() > 60) task = task.substr(0, 60) + "...";
  code << "def transform(doc):\n";
  code << "    # " << flavor << " approximation of: " << task << "\n";
  code << "    import re\n";
  code << "    result = {}\n";
  for (const auto& [k, v] : op.output_schema)
    code << "    result[\"" << k << "\"] = " << default_value_literal(v) << "\n";
  code << "    return result\n";
  return code.str();
}

}  // namespace

Choice StubInstantiator::choose(const ChooseRequest& req) {
  if (req.allowed.empty())
    fail(ErrorKind::NoApplicableDirective, "pruned registry is empty");

  struct Candidate {
    const Directive* d;
    Span span;
    int usage;
  };
  std::vector<Candidate> applicable;
  for (const Directive* d : req.allowed) {
    auto sites = match_sites(*d, req.pipeline);
    if (sites.empty()) continue;
    if (d->name == "model_substitution") {
      // only worth choosing when some catalog model is not yet on the path
      const ModelInfo* fresh = cheapest_model_where(catalog_, [&](const ModelInfo& m) {
        return req.context.models_tried.count(m.model_id) == 0;
      });
      if (fresh == nullptr) continue;
    }
    int usage = 0;
    auto it = req.context.usage.find(d->name);
    if (it != req.context.usage.end()) usage = it->second;
    applicable.push_back({d, sites.front(), usage});
  }
  if (applicable.empty())
    fail(ErrorKind::NoApplicableDirective, "no pruned directive matches the pipeline");

  auto pick_within = [&](const std::vector<std::string>& tier) -> const Candidate* {
    const Candidate* best = nullptr;
    for (const auto& c : applicable) {
      if (std::find(tier.begin(), tier.end(), c.d->name) == tier.end()) continue;
      if (!best || c.usage < best->usage ||
          (c.usage == best->usage && c.d->name < best->d->name))
        best = &c;
    }
    return best;
  };

  std::vector<std::string> listed;
  for (const auto& tier : preference_tiers(req.context.objective)) {
    listed.insert(listed.end(), tier.begin(), tier.end());
    if (const Candidate* c = pick_within(tier)) return {c->d->name, c->span};
  }
  // fallback tier: everything applicable that no preference tier named
  const Candidate* best = nullptr;
  for (const auto& c : applicable) {
    if (std::find(listed.begin(), listed.end(), c.d->name) != listed.end()) continue;
    if (!best || c.usage < best->usage ||
        (c.usage == best->usage && c.d->name < best->d->name))
      best = &c;
  }
  if (best) return {best->d->name, best->span};
  // everything applicable sits in preference tiers; rotate among them anyway
  best = &applicable.front();
  for (const auto& c : applicable)
    if (c.usage < best->usage || (c.usage == best->usage && c.d->name < best->d->name))
      best = &c;
  return {best->d->name, best->span};
}

// ---------------------------------------------------------------------------
// Stub instantiate
// ---------------------------------------------------------------------------

std::vector<Json> StubInstantiator::instantiate(const Directive& d, const PipelineSpec& p,
                                                Span span, Objective objective, DocPeek*) {
  const auto& ops = p.operators;
  std::vector<Json> out;

  if (d.name == "same_type_fusion") {
    const auto& a = ops[span.start];
    const auto& b = ops[span.end];
    std::string merged =
        a.prompt + "\n\n" + strip_keys(b.prompt, schema_key_set(a.effective_schema()));
    out.push_back({{"merged_prompt", merged}});
  } else if (d.name == "map_reduce_fusion") {
    const auto& map_op = ops[span.start];
    const auto& reduce_op = ops[span.end];
    std::string merged = map_op.prompt + "\n\nThen, across each group: " +
                         strip_keys(reduce_op.prompt, schema_key_set(map_op.effective_schema()));
    out.push_back({{"merged_prompt", merged}});
  } else if (d.name == "map_filter_fusion") {
    const auto& map_op = ops[span.start];
    const auto& filter_op = ops[span.end];
    const std::string& bool_key = filter_op.output_schema.begin()->first;
    std::string merged = map_op.prompt + "\n\nAlso decide: " +
                         strip_keys(filter_op.prompt, schema_key_set(map_op.effective_schema())) +
                         " Set " + bool_key + " to true or false accordingly.";
    out.push_back({{"merged_prompt", merged}});
  } else if (d.name == "filter_map_fusion") {
    const auto& filter_op = ops[span.start];
    const auto& map_op = ops[span.end];
    const std::string& bool_key = filter_op.output_schema.begin()->first;
    std::string merged = map_op.prompt + "\n\nAlso decide: " + filter_op.prompt + " Set " +
                         bool_key + " to true or false accordingly.";
    out.push_back({{"merged_prompt", merged}});
  } else if (d.name == "reordering") {
    out.push_back(Json::object());
  } else if (d.name == "code_substitution") {
    out.push_back({{"code_body", code_template(ops[span.start], "keyword")}});
  } else if (d.name == "code_sub_reduce") {
    const auto& reduce_op = ops[span.start];
    std::set<std::string> allowed(reduce_op.group_by.begin(), reduce_op.group_by.end());
    std::set<std::string> to_strip;
    for (const auto& k : prompt_placeholders(reduce_op.prompt))
      if (!allowed.count(k)) to_strip.insert(k);
    std::ostringstream code;
    code << "def aggregate(group_docs):\n"
         << "    items = []\n"
         << "    for doc in group_docs:\n"
         << "        items.extend(str(v) for v in doc.values())\n"
         << "    return {\"aggregates\": sorted(set(items))}\n";
    std::string map_prompt = "Using the aggregated items {{ input.aggregates }}, " +
                             strip_keys(reduce_op.prompt, to_strip);
    out.push_back({{"code_body", code.str()},
                   {"aggregate_key", "aggregates"},
                   {"map_prompt", map_prompt}});
  } else if (d.name == "doc_compression_code") {
    std::string target = doc_key_for(ops[span.start], p, span.start);
    std::string q = query_from_prompt(ops[span.start].prompt);
    std::ostringstream strict, broad;
    strict << "def transform(doc):\n"
           << "    import re\n"
           << "    # precision: keep only sentences containing an exact task term\n"
           << "    terms = \"" << q << "\".split()\n"
           << "    sentences = re.split(r\"(?<=[.!?])\\\\s+\", doc[\"" << target << "\"])\n"
           << "    keep = [s for s in sentences if any(t in s.lower() for t in terms)]\n"
           << "    return {\"" << target << "\": \" \".join(keep)}\n";
    broad << "def transform(doc):\n"
          << "    import re\n"
          << "    # recall: keep matching sentences plus one neighbor on each side\n"
          << "    terms = \"" << q << "\".split()\n"
          << "    sentences = re.split(r\"(?<=[.!?])\\\\s+\", doc[\"" << target << "\"])\n"
          << "    hits = {i for i, s in enumerate(sentences) if any(t in s.lower() for t in terms)}\n"
          << "    keep = [s for i, s in enumerate(sentences)\n"
          << "            if hits & {i - 1, i, i + 1}]\n"
          << "    return {\"" << target << "\": \" \".join(keep)}\n";
    out.push_back({{"target_key", target}, {"code_body", strict.str()}, {"token_ratio", 0.3}});
    out.push_back({{"target_key", target}, {"code_body", broad.str()}, {"token_ratio", 0.6}});
  } else if (d.name == "head_tail_compression") {
    std::string target = doc_key_for(ops[span.start], p, span.start);
    out.push_back({{"target_key", target}, {"head_words", 100}, {"tail_words", 50}});
    out.push_back({{"target_key", target}, {"head_words", 300}, {"tail_words", 150}});
  } else if (d.name == "chunk_sampling") {
    std::string q = query_from_prompt(ops[span.start + 2].prompt);
    out.push_back({{"method", "bm25"}, {"k", 10}, {"query", q}});
    out.push_back({{"method", "embedding"}, {"k", 30}, {"query", q}});
  } else if (d.name == "doc_sampling") {
    std::string q = query_from_prompt(ops[span.start].prompt);
    out.push_back({{"method", "bm25"}, {"k", 10}, {"query", q}});
    out.push_back({{"method", "embedding"}, {"k", 30}, {"query", q}});
  } else if (d.name == "cascade_filtering") {
    const auto& filter_op = ops[span.start];
    std::string q = query_from_prompt(filter_op.prompt);
    std::ostringstream code;
    code << "def keep(doc):\n"
         << "    text = \" \".join(str(v) for v in doc.values()).lower()\n"
         << "    return any(w in text for w in \"" << q << "\".split())\n";
    Json code_only = {{"use_code_prefilter", true},
                      {"use_llm_prefilter", false},
                      {"code_body", code.str()}};
    const ModelInfo* cheap =
        cheapest_model_where(catalog_, [](const ModelInfo&) { return true; });
    Json code_and_llm = {{"use_code_prefilter", true},
                         {"use_llm_prefilter", true},
                         {"code_body", code.str()},
                         {"llm_prompt", "Loosely judged, " + filter_op.prompt},
                         {"llm_model", cheap ? cheap->model_id : std::string("unknown")}};
    out.push_back(code_only);
    out.push_back(code_and_llm);
  } else if (d.name == "doc_summarization") {
    const auto& op = ops[span.start];
    std::string target = doc_key_for(op, p, span.start);
    std::string summary_prompt =
        "Write a concise summary of {{ input." + target +
        " }} that preserves every detail needed for this downstream task: " + op.prompt;
    out.push_back({{"target_key", target}, {"summary_prompt", summary_prompt}});
  } else if (d.name == "doc_compression_llm") {
    const auto& op = ops[span.start];
    std::string target = doc_key_for(op, p, span.start);
    std::string extraction_prompt =
        "Given {{ input." + target +
        " }} with line numbers, return only the line ranges relevant to this task: " + op.prompt;
    out.push_back({{"target_key", target}, {"extraction_prompt", extraction_prompt}});
  } else if (d.name == "model_substitution") {
    const auto& op = ops[span.start];
    const ModelInfo* cheapest = cheapest_model_where(catalog_, [&](const ModelInfo& m) {
      return !op.model || m.model_id != *op.model;
    });
    out.push_back({{"model", cheapest ? cheapest->model_id : std::string("unknown")}});
  } else if (d.name == "clarify_instructions") {
    const auto& op = ops[span.start];
    out.push_back({{"clarified_prompt",
                    op.prompt +
                        "\n\nBe precise and exhaustive: quote the exact supporting text for "
                        "every item, and do not invent values that are not present."}});
    out.push_back({{"clarified_prompt",
                    op.prompt +
                        "\n\nFollow the output schema exactly: emit every declared key, use "
                        "empty values when nothing qualifies, and keep every answer grounded "
                        "in the given text."}});
  } else if (d.name == "few_shot_examples") {
    const auto& op = ops[span.start];
    std::ostringstream block;
    block << "Input: (representative document)\nOutput: {";
    bool first = true;
    for (const auto& [k, v] : op.effective_schema()) {
      if (!first) block << ", ";
      first = false;
      block << "\"" << k << "\": " << default_value_literal(v);
    }
    block << "}";
    out.push_back({{"examples_block", block.str()}});
  } else if (d.name == "arbitrary_rewrite") {
    out.push_back({{"edits", stub_yaml_edit(p)}});
  } else if (d.name == "doc_chunking") {
    const auto& map_op = ops[span.start];
    std::string target = doc_key_for(map_op, p, span.start);
    auto avail = available_keys_after(p, size_t(span.start));
    // prefer a key downstream operators still need; otherwise first available
    std::string group_key;
    {
      std::set<std::string> produced = schema_key_set(map_op.output_schema);
      for (size_t i = size_t(span.end) + 1; i < ops.size() && group_key.empty(); ++i) {
        for (const auto& k : prompt_placeholders(ops[i].prompt))
          if (!produced.count(k) && avail.count(k) && k != target) {
            group_key = k;
            break;
          }
        for (const auto& k : ops[i].group_by)
          if (!produced.count(k) && avail.count(k) && k != target) {
            group_key = k;
            break;
          }
      }
      if (group_key.empty()) {
        for (const auto& k : avail)
          if (k != target) {
            group_key = k;
            break;
          }
      }
    }
    std::vector<std::string> merge_refs;
    for (const auto& [k, v] : map_op.output_schema)
      merge_refs.push_back("{{ input." + k + " }}");
    std::string reduce_prompt = "Combine the chunk-level results for each {{ input." +
                                group_key + " }}: merge " + join(merge_refs, ", ") +
                                " into consolidated values, removing duplicates.";
    out.push_back({{"target_key", target},
                   {"chunk_size", 1000},
                   {"context_chunks", 1},
                   {"group_key", group_key},
                   {"reduce_prompt", reduce_prompt}});
  } else {
    fail(ErrorKind::Internal, "stub has no template for directive: " + d.name);
  }

  (void)objective;
  while (int(out.size()) < d.candidate_count) out.push_back(out.back());
  if (int(out.size()) > d.candidate_count) out.resize(size_t(d.candidate_count));
  return out;
}

}  // namespace moar
