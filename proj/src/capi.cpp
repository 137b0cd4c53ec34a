#include "moar/moar.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "errors.hpp"
#include "landscape.hpp"
#include "strategies.hpp"
#include "trace.hpp"

using namespace moar;

struct moar_pipeline {
  PipelineSpec spec;
};
struct moar_catalog {
  ModelCatalog catalog;
};
struct moar_landscape {
  LandscapeModel model;
};
struct moar_result {
  std::string frontier_json;
  std::string frontier_csv;
  std::string trace_jsonl;
  int evaluations = 0;
};

namespace {

thread_local std::string g_last_error;

moar_status status_from(const Error& e) {
  g_last_error = e.what();
  switch (e.kind()) {
    case ErrorKind::Parse: return MOAR_ERR_PARSE;
    case ErrorKind::Validation:
    case ErrorKind::UnknownModel:
    case ErrorKind::IndexOutOfRange:
    case ErrorKind::PointNotFound:
    case ErrorKind::InvalidParams:
    case ErrorKind::RewriteInvalid:
      return MOAR_ERR_VALIDATION;
    case ErrorKind::BudgetExhausted: return MOAR_ERR_BUDGET;
    case ErrorKind::Endpoint:
    case ErrorKind::InstantiationFailed:
    case ErrorKind::EvaluatorTransport:
      return MOAR_ERR_AGENT;
    default: return MOAR_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename Fn>
moar_status guarded(Fn&& fn) {
  try {
    fn();
    return MOAR_OK;
  } catch (const Error& e) {
    return status_from(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MOAR_ERR_INTERNAL;
  }
}

RunSpec build_spec(const moar_pipeline* p, const moar_catalog* c, const moar_landscape* l,
                   const moar_run_options* options) {
  RunSpec spec;
  spec.pipeline = p->spec;
  spec.catalog = c->catalog;
  spec.landscape = l->model;
  if (options != nullptr) {
    if (options->budget > 0) spec.config.budget = int(options->budget);
    spec.config.seed = options->seed;
    if (options->workers > 0) spec.config.workers = int(options->workers);
    if (options->strategy && *options->strategy)
      spec.strategy = strategy_from_string(options->strategy);
    if (options->agent_endpoint && *options->agent_endpoint)
      spec.agent_endpoint = options->agent_endpoint;
    if (options->sample_docs_jsonl && *options->sample_docs_jsonl)
      spec.sample_docs_jsonl = options->sample_docs_jsonl;
  }
  return spec;
}

}  // namespace

extern "C" {

const char* moar_last_error(void) { return g_last_error.c_str(); }

void moar_string_free(char* s) { std::free(s); }

moar_status moar_pipeline_parse_yaml(const char* yaml_text, moar_pipeline** out) {
  if (yaml_text == nullptr || out == nullptr) {
    g_last_error = "null argument";
    return MOAR_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] { *out = new moar_pipeline{pipeline_from_yaml(yaml_text)}; });
}

void moar_pipeline_free(moar_pipeline* p) { delete p; }

moar_status moar_pipeline_validate(const moar_pipeline* p, char** report_json) {
  if (p == nullptr || report_json == nullptr) {
    g_last_error = "null argument";
    return MOAR_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    ValidationReport report = validate_pipeline(p->spec);
    Json violations = Json::array();
    for (const auto& v : report.violations)
      violations.push_back(
          {{"operator_id", v.operator_id}, {"rule", v.rule}, {"detail", v.detail}});
    Json out{{"ok", report.ok()}, {"violations", violations}};
    *report_json = dup_string(out.dump(2));
  });
}

moar_status moar_pipeline_canonical_key(const moar_pipeline* p, char** hex) {
  if (p == nullptr || hex == nullptr) {
    g_last_error = "null argument";
    return MOAR_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] { *hex = dup_string(pipeline_key(p->spec)); });
}

moar_status moar_pipeline_to_yaml(const moar_pipeline* p, char** yaml_text) {
  if (p == nullptr || yaml_text == nullptr) {
    g_last_error = "null argument";
    return MOAR_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] { *yaml_text = dup_string(pipeline_to_yaml(p->spec)); });
}

moar_status moar_catalog_parse_yaml(const char* yaml_text, moar_catalog** out) {
  if (yaml_text == nullptr || out == nullptr) {
    g_last_error = "null argument";
    return MOAR_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] { *out = new moar_catalog{catalog_from_yaml(yaml_text)}; });
}

void moar_catalog_free(moar_catalog* c) { delete c; }

moar_status moar_landscape_parse_yaml(const char* yaml_text, moar_landscape** out) {
  if (yaml_text == nullptr || out == nullptr) {
    g_last_error = "null argument";
    return MOAR_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] { *out = new moar_landscape{LandscapeModel::from_yaml(yaml_text)}; });
}

moar_status moar_landscape_builtin(const char* name, moar_landscape** out) {
  if (name == nullptr || out == nullptr) {
    g_last_error = "null argument";
    return MOAR_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] { *out = new moar_landscape{LandscapeModel::builtin(name)}; });
}

moar_status moar_landscape_to_yaml(const moar_landscape* l, char** yaml_text) {
  if (l == nullptr || yaml_text == nullptr) {
    g_last_error = "null argument";
    return MOAR_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] { *yaml_text = dup_string(l->model.to_yaml()); });
}

void moar_landscape_free(moar_landscape* l) { delete l; }

moar_status moar_simulate(const moar_pipeline* p, const moar_catalog* c,
                          const moar_landscape* l, double* cost_out, double* accuracy_out) {
  if (!p || !c || !l || !cost_out || !accuracy_out) {
    g_last_error = "null argument";
    return MOAR_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    ValidationReport report = validate_pipeline(p->spec);
    if (!report.ok())
      fail(ErrorKind::Validation, "pipeline is invalid:\n" + report.to_string());
    SimulatedEvaluator evaluator(l->model, c->catalog);
    EvalResult r = evaluator.evaluate(p->spec);
    *cost_out = r.cost.dollars();
    *accuracy_out = r.accuracy;
  });
}

moar_status moar_optimize(const moar_pipeline* p, const moar_catalog* c,
                          const moar_landscape* l, const moar_run_options* options,
                          moar_result** out) {
  if (!p || !c || !l || !out) {
    g_last_error = "null argument";
    return MOAR_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    RunSpec spec = build_spec(p, c, l, options);
    RunResult run = run_search(spec);
    auto* result = new moar_result;
    result->frontier_json = frontier_to_json(run).dump(2);
    result->frontier_csv = frontier_to_csv(run);
    result->trace_jsonl = trace_to_jsonl(run.trace);
    result->evaluations = run.evaluations_used;
    *out = result;
  });
}

const char* moar_result_frontier_json(const moar_result* r) {
  return r ? r->frontier_json.c_str() : "";
}
const char* moar_result_frontier_csv(const moar_result* r) {
  return r ? r->frontier_csv.c_str() : "";
}
const char* moar_result_trace_jsonl(const moar_result* r) {
  return r ? r->trace_jsonl.c_str() : "";
}
int moar_result_evaluations(const moar_result* r) { return r ? r->evaluations : 0; }
void moar_result_free(moar_result* r) { delete r; }

moar_status moar_frontier_from_trace(const char* trace_jsonl, char** frontier_json) {
  if (!trace_jsonl || !frontier_json) {
    g_last_error = "null argument";
    return MOAR_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] { *frontier_json = dup_string(frontier_from_trace(trace_jsonl).dump(2)); });
}

moar_status moar_replay_trace(const char* trace_jsonl, char** diff_message) {
  if (!trace_jsonl) {
    g_last_error = "null argument";
    return MOAR_ERR_INVALID_ARGUMENT;
  }
  try {
    auto diff = replay_trace(trace_jsonl);
    if (!diff) {
      if (diff_message) *diff_message = nullptr;
      return MOAR_OK;
    }
    g_last_error = *diff;
    if (diff_message) *diff_message = dup_string(*diff);
    return MOAR_ERR_REPLAY_MISMATCH;
  } catch (const Error& e) {
    return status_from(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MOAR_ERR_INTERNAL;
  }
}

moar_status moar_registry_dump_json(char** json_out) {
  if (!json_out) {
    g_last_error = "null argument";
    return MOAR_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] { *json_out = dup_string(Registry::builtin().dump().dump(2)); });
}

moar_status moar_bench(const moar_pipeline* p, const moar_catalog* c, const moar_landscape* l,
                       const char* strategies_csv, uint32_t n_seeds,
                       const moar_run_options* options, char** table_json, char** table_text) {
  if (!p || !c || !l || !strategies_csv) {
    g_last_error = "null argument";
    return MOAR_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    RunSpec spec = build_spec(p, c, l, options);
    auto strategies = split_csv(strategies_csv);
    if (strategies.empty()) fail(ErrorKind::Parse, "no strategies given");
    for (const auto& s : strategies) strategy_from_string(s);  // validate early
    BenchReport report = run_bench(spec, strategies, int(n_seeds));
    if (table_json) *table_json = dup_string(report.to_json().dump(2));
    if (table_text) *table_text = dup_string(report.to_table());
  });
}

}  // extern "C"
