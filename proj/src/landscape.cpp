#include "landscape.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>

#include "directives.hpp"
#include "errors.hpp"
#include "util.hpp"

namespace moar {

namespace {

double extras_number(const OperatorConfig& op, const std::string& key, double fallback) {
  auto it = op.extras.find(key);
  if (it == op.extras.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (...) {
    return fallback;
  }
}

double prompt_tokens(const std::string& prompt) { return double(prompt.size()) / 4.0; }

double output_tokens(const Schema& schema, const LandscapeModel& m) {
  double total = 0.0;
  for (const auto& [k, v] : schema) {
    bool is_list = v.kind == ValueKind::ListString || v.kind == ValueKind::ListObject;
    total += m.output_tokens_per_key * (is_list ? m.list_output_multiplier : 1.0);
  }
  return total;
}

// Document flow while walking the pipeline front to back. Only non-LLM
// operators reshape the flow: code compressors shrink documents, code filters
// and samplers cut multiplicities, split fans chunks out, code_reduce
// collapses groups. LLM operators are charged on the flow they see and pass
// it through unchanged, which keeps cost monotone under operator removal.
struct Flow {
  double doc_tokens;
  double docs;
  double chunks_per_doc = 1.0;

  double units() const { return docs * chunks_per_doc; }
};

void advance_flow(const OperatorConfig& op, const LandscapeModel& m, Flow& flow) {
  switch (op.type) {
    case OperatorType::CodeMap: {
      double head = extras_number(op, "head_words", 0);
      double tail = extras_number(op, "tail_words", 0);
      if (head + tail > 0) {
        flow.doc_tokens = std::min(flow.doc_tokens, (head + tail) * m.tokens_per_word);
      } else {
        double ratio = extras_number(op, "token_ratio", 1.0);
        flow.doc_tokens *= std::clamp(ratio, 0.0, 1.0);
      }
      break;
    }
    case OperatorType::CodeFilter: {
      if (flow.chunks_per_doc > 1.0)
        flow.chunks_per_doc = std::max(1.0, flow.chunks_per_doc * m.code_filter_selectivity);
      else
        flow.docs = std::max(1.0, flow.docs * m.code_filter_selectivity);
      break;
    }
    case OperatorType::CodeReduce: {
      flow.chunks_per_doc = 1.0;
      flow.docs = std::min(flow.docs, m.default_group_count);
      flow.doc_tokens = m.aggregate_doc_tokens;
      break;
    }
    case OperatorType::Split: {
      double chunk_size = extras_number(op, "chunk_size", 1000);
      if (chunk_size > 0 && flow.doc_tokens > chunk_size) {
        flow.chunks_per_doc *= std::ceil(flow.doc_tokens / chunk_size);
        flow.doc_tokens = chunk_size;
      }
      break;
    }
    case OperatorType::Gather: {
      double before = extras_number(op, "context_before", 1);
      double after = extras_number(op, "context_after", 1);
      flow.doc_tokens *= 1.0 + before + after;
      break;
    }
    case OperatorType::Sample: {
      double k = op.sampling ? double(op.sampling->k) : 1.0;
      if (flow.chunks_per_doc > 1.0) {
        flow.chunks_per_doc = std::min(flow.chunks_per_doc, k);
      } else if (op.extras.count("per_group_keys")) {
        flow.docs = std::min(flow.docs, k * m.default_group_count);
      } else {
        flow.docs = std::min(flow.docs, k);
      }
      break;
    }
    default:
      break;  // LLM operators and unnest leave the flow unchanged
  }
}

}  // namespace

SimulatedEvaluator::SimulatedEvaluator(LandscapeModel model, ModelCatalog catalog,
                                       uint64_t run_seed)
    : model_(std::move(model)), catalog_(std::move(catalog)), run_seed_(run_seed) {}

WorkloadProfile SimulatedEvaluator::profile_for(const PipelineSpec& p) const {
  WorkloadProfile profile;
  profile.catalog = catalog_;
  Flow flow{model_.base_doc_tokens, model_.base_docs, 1.0};
  for (const auto& op : p.operators) {
    if (is_llm(op.type)) {
      if (op.type == OperatorType::ParallelMap) {
        for (size_t b = 0; b < op.branches.size(); ++b) {
          OperatorLoad load;
          load.input_tokens = prompt_tokens(op.branches[b].prompt) + flow.doc_tokens;
          load.output_tokens = output_tokens(op.branches[b].output_schema, model_);
          load.documents = flow.units();
          profile.per_operator[op.id + "#" + std::to_string(b)] = load;
        }
      } else {
        OperatorLoad load;
        load.input_tokens = prompt_tokens(op.prompt) + flow.doc_tokens;
        load.output_tokens = output_tokens(op.output_schema, model_);
        if (op.type == OperatorType::Extract) load.output_tokens *= model_.extract_output_factor;
        load.documents = flow.units();
        profile.per_operator[op.id] = load;
      }
    }
    advance_flow(op, model_, flow);
  }
  return profile;
}

double SimulatedEvaluator::accuracy_for(const PipelineSpec& p) const {
  double quality = model_.task_base_accuracy;
  Flow flow{model_.base_doc_tokens, model_.base_docs, 1.0};
  for (const auto& op : p.operators) {
    if (is_llm(op.type)) {
      const ModelInfo* info = catalog_.find(op.model.value_or(""));
      if (info == nullptr)
        fail(ErrorKind::UnknownModel, "simulate: unknown model for operator '" + op.id + "'");
      auto it = model_.model_quality.find(info->model_id);
      double q = it != model_.model_quality.end() ? it->second : info->quality_hint;
      double input_tokens =
          flow.doc_tokens +
          prompt_tokens(op.type == OperatorType::ParallelMap && !op.branches.empty()
                            ? op.branches.front().prompt
                            : op.prompt);
      if (input_tokens > double(info->context_window_tokens)) {
        q *= std::max(model_.context_penalty_floor,
                      double(info->context_window_tokens) / input_tokens);
      }
      quality *= q;
    } else if (is_code(op.type)) {
      quality *= model_.code_quality;
    }
    advance_flow(op, model_, flow);
  }
  auto features = rewrite_features(p);
  for (const auto& f : features) {
    auto it = model_.feature_effects.find(f);
    if (it != model_.feature_effects.end()) quality *= it->second;
  }
  for (auto a = features.begin(); a != features.end(); ++a) {
    for (auto b = std::next(a); b != features.end(); ++b) {
      auto it = model_.interactions.find(*a + "|" + *b);
      if (it != model_.interactions.end()) quality *= it->second;
    }
  }
  if (model_.noise_scale > 0.0) {
    uint64_t key = sha256_fold64(canonical_serialize(p)) ^ (model_.seed + run_seed_);
    double draw = unit_double(splitmix64(key)) * 2.0 - 1.0;
    quality += draw * model_.noise_scale;
  }
  return std::clamp(quality, 0.0, 1.0);
}

EvalResult SimulatedEvaluator::evaluate(const PipelineSpec& p) {
  EvalResult result;
  result.cost = estimate_cost(p, profile_for(p));
  result.accuracy = accuracy_for(p);
  return result;
}

// ---------------------------------------------------------------------------
// YAML
// ---------------------------------------------------------------------------

LandscapeModel LandscapeModel::from_yaml(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    fail(ErrorKind::Parse, std::string("bad landscape YAML: ") + e.what());
  }
  LandscapeModel m;
  auto get = [&](const char* key, double fallback) {
    return root[key] ? root[key].as<double>() : fallback;
  };
  if (root["version"]) m.version = root["version"].as<int>();
  if (root["seed"]) m.seed = root["seed"].as<uint64_t>();
  m.noise_scale = get("noise_scale", m.noise_scale);
  m.base_doc_tokens = get("base_doc_tokens", m.base_doc_tokens);
  m.base_docs = get("base_docs", m.base_docs);
  m.tokens_per_word = get("tokens_per_word", m.tokens_per_word);
  m.output_tokens_per_key = get("output_tokens_per_key", m.output_tokens_per_key);
  m.list_output_multiplier = get("list_output_multiplier", m.list_output_multiplier);
  m.extract_output_factor = get("extract_output_factor", m.extract_output_factor);
  m.code_filter_selectivity = get("code_filter_selectivity", m.code_filter_selectivity);
  m.default_group_count = get("default_group_count", m.default_group_count);
  m.aggregate_doc_tokens = get("aggregate_doc_tokens", m.aggregate_doc_tokens);
  m.task_base_accuracy = get("task_base_accuracy", m.task_base_accuracy);
  m.code_quality = get("code_quality", m.code_quality);
  m.context_penalty_floor = get("context_penalty_floor", m.context_penalty_floor);
  if (root["model_quality"])
    for (const auto& kv : root["model_quality"])
      m.model_quality[kv.first.as<std::string>()] = kv.second.as<double>();
  if (root["feature_effects"])
    for (const auto& kv : root["feature_effects"])
      m.feature_effects[kv.first.as<std::string>()] = kv.second.as<double>();
  if (root["interactions"]) {
    for (const auto& entry : root["interactions"]) {
      // [feature_a, feature_b, multiplier]
      if (!entry.IsSequence() || entry.size() != 3)
        fail(ErrorKind::Parse, "interactions entries must be [a, b, multiplier]");
      std::string a = entry[0].as<std::string>();
      std::string b = entry[1].as<std::string>();
      if (b < a) std::swap(a, b);
      m.interactions[a + "|" + b] = entry[2].as<double>();
    }
  }
  return m;
}

std::string LandscapeModel::to_yaml() const {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "version" << YAML::Value << version;
  out << YAML::Key << "seed" << YAML::Value << seed;
  out << YAML::Key << "noise_scale" << YAML::Value << noise_scale;
  out << YAML::Key << "base_doc_tokens" << YAML::Value << base_doc_tokens;
  out << YAML::Key << "base_docs" << YAML::Value << base_docs;
  out << YAML::Key << "tokens_per_word" << YAML::Value << tokens_per_word;
  out << YAML::Key << "output_tokens_per_key" << YAML::Value << output_tokens_per_key;
  out << YAML::Key << "list_output_multiplier" << YAML::Value << list_output_multiplier;
  out << YAML::Key << "extract_output_factor" << YAML::Value << extract_output_factor;
  out << YAML::Key << "code_filter_selectivity" << YAML::Value << code_filter_selectivity;
  out << YAML::Key << "default_group_count" << YAML::Value << default_group_count;
  out << YAML::Key << "aggregate_doc_tokens" << YAML::Value << aggregate_doc_tokens;
  out << YAML::Key << "task_base_accuracy" << YAML::Value << task_base_accuracy;
  out << YAML::Key << "code_quality" << YAML::Value << code_quality;
  out << YAML::Key << "context_penalty_floor" << YAML::Value << context_penalty_floor;
  if (!model_quality.empty()) {
    out << YAML::Key << "model_quality" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : model_quality) out << YAML::Key << k << YAML::Value << v;
    out << YAML::EndMap;
  }
  if (!feature_effects.empty()) {
    out << YAML::Key << "feature_effects" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : feature_effects) out << YAML::Key << k << YAML::Value << v;
    out << YAML::EndMap;
  }
  if (!interactions.empty()) {
    out << YAML::Key << "interactions" << YAML::Value << YAML::BeginSeq;
    for (const auto& [k, v] : interactions) {
      size_t bar = k.find('|');
      out << YAML::Flow << YAML::BeginSeq << k.substr(0, bar) << k.substr(bar + 1) << v
          << YAML::EndSeq;
    }
    out << YAML::EndSeq;
  }
  out << YAML::EndMap;
  std::string text = out.c_str();
  text.push_back('\n');
  return text;
}

LandscapeModel LandscapeModel::builtin(const std::string& name) {
  if (name == "default") {
    LandscapeModel m;
    m.version = 1;
    m.seed = 7;
    m.noise_scale = 0.01;
    m.base_doc_tokens = 20000;
    m.task_base_accuracy = 0.95;
    m.code_quality = 0.82;
    m.feature_effects = {
        {"clarified", 1.04}, {"few_shot", 1.03},       {"fused", 0.97},
        {"chunked", 0.96},   {"sampled", 0.97},        {"summarized", 0.95},
        {"llm_extracted", 0.96}, {"code_compressed", 0.93}, {"head_tail", 0.90},
        {"cascade", 0.97},   {"reordered", 1.0},       {"code_sub_reduce", 0.95},
    };
    m.interactions = {{"clarified|few_shot", 1.02}};
    return m;
  }
  if (name == "adversarial") {
    // Interactions reward rewrite pairs whose first step looks strictly worse
    // in isolation; per-step greedy search cannot reach the strong composites.
    LandscapeModel m;
    m.version = 1;
    m.seed = 11;
    m.noise_scale = 0.015;
    m.base_doc_tokens = 90000;
    m.task_base_accuracy = 0.72;
    m.code_quality = 0.45;
    m.feature_effects = {
        {"clarified", 1.03}, {"few_shot", 1.02},      {"fused", 0.97},
        {"chunked", 0.88},   {"sampled", 0.97},       {"summarized", 0.90},
        {"llm_extracted", 0.90}, {"code_compressed", 0.55}, {"head_tail", 0.50},
        {"cascade", 0.96},   {"reordered", 1.0},      {"code_sub_reduce", 0.80},
    };
    m.interactions = {
        {"chunked|clarified", 1.38},
        {"chunked|few_shot", 1.15},
        {"chunked|sampled", 1.10},
        {"clarified|few_shot", 1.04},
    };
    return m;
  }
  fail(ErrorKind::Parse, "unknown builtin landscape: " + name);
}

}  // namespace moar
