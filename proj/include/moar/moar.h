/*
 * moar - multi-objective optimizer for semantic-operator pipelines.
 *
 * C API over the C++ core: opaque handles, integer status codes, and
 * JSON/YAML/CSV text crossing the boundary as NUL-terminated strings.
 * Strings returned through `char **out` parameters are heap-allocated and
 * must be released with moar_string_free(); strings returned as
 * `const char *` from a result handle stay owned by that handle.
 */
#ifndef MOAR_H
#define MOAR_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum moar_status {
  MOAR_OK = 0,
  MOAR_ERR_INVALID_ARGUMENT = 1,
  MOAR_ERR_PARSE = 2,          /* malformed YAML/JSON input */
  MOAR_ERR_VALIDATION = 3,     /* pipeline/catalog violates its invariants */
  MOAR_ERR_BUDGET = 4,         /* evaluation budget cannot cover the run */
  MOAR_ERR_AGENT = 5,          /* agent endpoint unreachable or misbehaving */
  MOAR_ERR_REPLAY_MISMATCH = 6,
  MOAR_ERR_INTERNAL = 7
} moar_status;

typedef struct moar_pipeline moar_pipeline;
typedef struct moar_catalog moar_catalog;
typedef struct moar_landscape moar_landscape;
typedef struct moar_result moar_result;

/* Message for the most recent failing call on this thread. */
const char *moar_last_error(void);

void moar_string_free(char *s);

/* ---- pipelines ---------------------------------------------------------- */

moar_status moar_pipeline_parse_yaml(const char *yaml_text, moar_pipeline **out);
void moar_pipeline_free(moar_pipeline *p);

/* Validation report as JSON {ok, violations:[{operator_id, rule, detail}]}. */
moar_status moar_pipeline_validate(const moar_pipeline *p, char **report_json);
/* sha256 of the canonical serialization (cache/frontier identity). */
moar_status moar_pipeline_canonical_key(const moar_pipeline *p, char **hex);
moar_status moar_pipeline_to_yaml(const moar_pipeline *p, char **yaml_text);

/* ---- model catalogs and landscapes -------------------------------------- */

moar_status moar_catalog_parse_yaml(const char *yaml_text, moar_catalog **out);
void moar_catalog_free(moar_catalog *c);

moar_status moar_landscape_parse_yaml(const char *yaml_text, moar_landscape **out);
/* name: "default" or "adversarial" */
moar_status moar_landscape_builtin(const char *name, moar_landscape **out);
moar_status moar_landscape_to_yaml(const moar_landscape *l, char **yaml_text);
void moar_landscape_free(moar_landscape *l);

/* Simulated evaluation of one pipeline (cost in dollars, accuracy in [0,1]). */
moar_status moar_simulate(const moar_pipeline *p, const moar_catalog *c,
                          const moar_landscape *l, double *cost_out, double *accuracy_out);

/* ---- optimization ------------------------------------------------------- */

typedef struct moar_run_options {
  uint32_t budget;          /* pipeline evaluations (B) */
  uint64_t seed;
  uint32_t workers;         /* 1 = fully deterministic */
  const char *strategy;     /* "moar" (default), "greedy", "random" */
  const char *agent_endpoint;    /* NULL/empty = deterministic stub */
  const char *sample_docs_jsonl; /* optional sample documents for the agent */
} moar_run_options;

moar_status moar_optimize(const moar_pipeline *p, const moar_catalog *c,
                          const moar_landscape *l, const moar_run_options *options,
                          moar_result **out);

/* Owned by the result handle; valid until moar_result_free. */
const char *moar_result_frontier_json(const moar_result *r);
const char *moar_result_frontier_csv(const moar_result *r);
const char *moar_result_trace_jsonl(const moar_result *r);
int moar_result_evaluations(const moar_result *r);
void moar_result_free(moar_result *r);

/* ---- traces ------------------------------------------------------------- */

/* Recompute the frontier recorded in a trace. */
moar_status moar_frontier_from_trace(const char *trace_jsonl, char **frontier_json);
/* Re-run a workers=1 trace and assert bit-identical reproduction. On
 * mismatch returns MOAR_ERR_REPLAY_MISMATCH and fills *diff_message. */
moar_status moar_replay_trace(const char *trace_jsonl, char **diff_message);

/* ---- registry and bench -------------------------------------------------- */

/* The compiled-in directive catalog (name, category, short_doc, lhs, ...). */
moar_status moar_registry_dump_json(char **json_out);

/* Aggregate strategy comparison over consecutive seeds; table_json carries
 * per-run rows plus win-rate / sign-test aggregates, table_text a printable
 * table. Either output pointer may be NULL. */
moar_status moar_bench(const moar_pipeline *p, const moar_catalog *c, const moar_landscape *l,
                       const char *strategies_csv, uint32_t n_seeds,
                       const moar_run_options *options, char **table_json, char **table_text);

#ifdef __cplusplus
}
#endif

#endif /* MOAR_H */
