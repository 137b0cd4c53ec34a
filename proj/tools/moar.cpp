// moar command-line interface. Talks to the core exclusively through the
// extern-C API in moar/moar.h.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "moar/moar.h"

namespace {

// exit codes: 0 success, 2 validation/input errors, 3 budget or
// infrastructure failures
constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitInfra = 3;

int exit_code_for(moar_status status) {
  switch (status) {
    case MOAR_OK: return kExitOk;
    case MOAR_ERR_INVALID_ARGUMENT:
    case MOAR_ERR_PARSE:
    case MOAR_ERR_VALIDATION:
      return kExitValidation;
    default: return kExitInfra;
  }
}

int report_failure(const char* what, moar_status status) {
  std::fprintf(stderr, "error: %s: %s\n", what, moar_last_error());
  return exit_code_for(status);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::fprintf(stderr, "error: cannot read %s\n", path.c_str());
    std::exit(kExitValidation);
  }
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::fprintf(stderr, "error: cannot write %s\n", path.c_str());
    std::exit(kExitInfra);
  }
  out << content;
}

struct Handles {
  moar_pipeline* pipeline = nullptr;
  moar_catalog* catalog = nullptr;
  moar_landscape* landscape = nullptr;

  ~Handles() {
    moar_pipeline_free(pipeline);
    moar_catalog_free(catalog);
    moar_landscape_free(landscape);
  }
};

int load_inputs(const std::string& pipeline_path, const std::string& models_path,
                const std::string& landscape_path, Handles& h) {
  moar_status status = moar_pipeline_parse_yaml(read_file(pipeline_path).c_str(), &h.pipeline);
  if (status != MOAR_OK) return report_failure("pipeline", status);
  status = moar_catalog_parse_yaml(read_file(models_path).c_str(), &h.catalog);
  if (status != MOAR_OK) return report_failure("models", status);
  if (landscape_path.empty())
    status = moar_landscape_builtin("default", &h.landscape);
  else
    status = moar_landscape_parse_yaml(read_file(landscape_path).c_str(), &h.landscape);
  if (status != MOAR_OK) return report_failure("landscape", status);

  char* report = nullptr;
  status = moar_pipeline_validate(h.pipeline, &report);
  if (status != MOAR_OK) return report_failure("validate", status);
  std::string report_text = report;
  moar_string_free(report);
  if (report_text.find("\"ok\": true") == std::string::npos) {
    std::fprintf(stderr, "error: pipeline failed validation:\n%s\n", report_text.c_str());
    return kExitValidation;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"moar - multi-objective optimizer for semantic operator pipelines"};
  app.require_subcommand(1);

  // ---- optimize ----
  std::string pipeline_path, models_path, landscape_path, agent_endpoint, sample_path, out_dir;
  unsigned budget = 40, workers = 3;
  uint64_t seed = 0;
  std::string strategy = "moar";
  auto* optimize = app.add_subcommand("optimize", "search for a Pareto frontier of rewrites");
  optimize->add_option("--pipeline", pipeline_path, "pipeline YAML")->required();
  optimize->add_option("--models", models_path, "model catalog YAML")->required();
  optimize->add_option("--budget", budget, "evaluation budget B");
  optimize->add_option("--seed", seed, "RNG seed");
  optimize->add_option("--workers", workers, "concurrent rewrite workers");
  optimize->add_option("--landscape", landscape_path, "simulated landscape YAML");
  optimize->add_option("--agent-endpoint", agent_endpoint,
                       "agent URL (default: AGENT_ENDPOINT env var, else built-in stub)");
  optimize->add_option("--sample", sample_path, "sample documents JSONL for read_next_doc");
  optimize->add_option("--strategy", strategy, "moar | greedy | random");
  optimize->add_option("--out", out_dir, "output directory")->required();

  // ---- frontier ----
  std::string trace_path;
  auto* frontier = app.add_subcommand("frontier", "recompute and print a trace's frontier");
  frontier->add_option("--trace", trace_path, "trace JSONL")->required();

  // ---- replay ----
  std::string replay_trace_path;
  auto* replay = app.add_subcommand("replay", "re-run a trace and assert bit-identical output");
  replay->add_option("--trace", replay_trace_path, "trace JSONL")->required();

  // ---- bench ----
  std::string bench_pipeline, bench_models, bench_landscape, strategies = "moar,greedy,random";
  unsigned bench_seeds = 20, bench_budget = 40;
  uint64_t bench_seed0 = 0;
  auto* bench = app.add_subcommand("bench", "compare strategies over seeded runs");
  bench->add_option("--pipeline", bench_pipeline, "pipeline YAML")->required();
  bench->add_option("--models", bench_models, "model catalog YAML")->required();
  bench->add_option("--landscape", bench_landscape, "landscape YAML (default: adversarial)");
  bench->add_option("--strategies", strategies, "comma-separated strategy list");
  bench->add_option("--seeds", bench_seeds, "number of seeded runs per strategy");
  bench->add_option("--budget", bench_budget, "evaluation budget per run");
  bench->add_option("--seed", bench_seed0, "first seed");

  // ---- registry ----
  auto* registry = app.add_subcommand("registry", "rewrite directive registry");
  auto* registry_dump = registry->add_subcommand("dump", "emit the directive catalog as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  if (optimize->parsed()) {
    Handles h;
    int rc = load_inputs(pipeline_path, models_path, landscape_path, h);
    if (rc != kExitOk) return rc;
    if (agent_endpoint.empty()) {
      const char* env = std::getenv("AGENT_ENDPOINT");
      if (env != nullptr) agent_endpoint = env;
    }
    std::string sample_text = sample_path.empty() ? "" : read_file(sample_path);
    moar_run_options options{};
    options.budget = budget;
    options.seed = seed;
    options.workers = workers;
    options.strategy = strategy.c_str();
    options.agent_endpoint = agent_endpoint.c_str();
    options.sample_docs_jsonl = sample_text.c_str();
    moar_result* result = nullptr;
    moar_status status = moar_optimize(h.pipeline, h.catalog, h.landscape, &options, &result);
    if (status != MOAR_OK) return report_failure("optimize", status);
    std::filesystem::create_directories(out_dir);
    write_file(out_dir + "/frontier.json", moar_result_frontier_json(result));
    write_file(out_dir + "/frontier.csv", moar_result_frontier_csv(result));
    write_file(out_dir + "/trace.jsonl", moar_result_trace_jsonl(result));
    std::printf("%s\n", moar_result_frontier_json(result));
    std::fprintf(stderr, "evaluations used: %d; outputs in %s\n",
                 moar_result_evaluations(result), out_dir.c_str());
    moar_result_free(result);
    return kExitOk;
  }

  if (frontier->parsed()) {
    char* json = nullptr;
    moar_status status = moar_frontier_from_trace(read_file(trace_path).c_str(), &json);
    if (status != MOAR_OK) return report_failure("frontier", status);
    std::printf("%s\n", json);
    moar_string_free(json);
    return kExitOk;
  }

  if (replay->parsed()) {
    char* diff = nullptr;
    moar_status status = moar_replay_trace(read_file(replay_trace_path).c_str(), &diff);
    if (status == MOAR_OK) {
      std::printf("replay ok: trace reproduced bit-identically\n");
      return kExitOk;
    }
    if (status == MOAR_ERR_REPLAY_MISMATCH) {
      std::fprintf(stderr, "replay mismatch:\n%s\n", diff ? diff : "");
      moar_string_free(diff);
      return kExitInfra;
    }
    return report_failure("replay", status);
  }

  if (bench->parsed()) {
    Handles h;
    std::string landscape = bench_landscape;
    moar_status status;
    status = moar_pipeline_parse_yaml(read_file(bench_pipeline).c_str(), &h.pipeline);
    if (status != MOAR_OK) return report_failure("pipeline", status);
    status = moar_catalog_parse_yaml(read_file(bench_models).c_str(), &h.catalog);
    if (status != MOAR_OK) return report_failure("models", status);
    if (landscape.empty())
      status = moar_landscape_builtin("adversarial", &h.landscape);
    else
      status = moar_landscape_parse_yaml(read_file(landscape).c_str(), &h.landscape);
    if (status != MOAR_OK) return report_failure("landscape", status);
    moar_run_options options{};
    options.budget = bench_budget;
    options.seed = bench_seed0;
    options.workers = 1;
    char* table_json = nullptr;
    char* table_text = nullptr;
    status = moar_bench(h.pipeline, h.catalog, h.landscape, strategies.c_str(), bench_seeds,
                        &options, &table_json, &table_text);
    if (status != MOAR_OK) return report_failure("bench", status);
    std::printf("%s\n", table_text);
    std::fprintf(stderr, "%s\n", table_json);
    moar_string_free(table_json);
    moar_string_free(table_text);
    return kExitOk;
  }

  if (registry_dump->parsed()) {
    char* json = nullptr;
    moar_status status = moar_registry_dump_json(&json);
    if (status != MOAR_OK) return report_failure("registry dump", status);
    std::printf("%s\n", json);
    moar_string_free(json);
    return kExitOk;
  }

  std::fprintf(stderr, "error: no subcommand\n");
  return kExitValidation;
}
