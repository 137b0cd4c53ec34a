#include <doctest.h>

#include "errors.hpp"
#include "helpers.hpp"
#include "ir.hpp"

using namespace moar;
using namespace moar::testing;

TEST_CASE("validate: minimal well-formed pipeline") {
  PipelineSpec p = seed_single_map();
  CHECK(validate_pipeline(p).ok());
}

TEST_CASE("validate: dangling placeholder reported with operator and rule") {
  PipelineSpec p = seed_single_map();
  p.operators[0].prompt = "Summarize {{ input.summary }} please.";
  auto report = validate_pipeline(p);
  REQUIRE_FALSE(report.ok());
  CHECK(report.violations[0].operator_id == "extract_factors");
  CHECK(report.violations[0].rule == "dangling_placeholder");
}

TEST_CASE("validate: map feeding a code_filter that tests the map's boolean") {
  PipelineSpec p = seed_single_map();
  p.operators[0].output_schema["keep"] = boolean_type();
  OperatorConfig cf;
  cf.id = "drop_flagged";
  cf.type = OperatorType::CodeFilter;
  cf.output_schema = {{"keep", boolean_type()}};
  cf.code_body = "def keep(doc):\n    return bool(doc[\"keep\"])\n";
  cf.extras["predicate_key"] = "keep";
  p.operators.push_back(std::move(cf));
  CHECK(validate_pipeline(p).ok());

  p.operators[1].extras["predicate_key"] = "missing";
  CHECK_FALSE(validate_pipeline(p).ok());
}

TEST_CASE("validate: LLM/code class rules") {
  PipelineSpec p = seed_single_map();
  SUBCASE("LLM op without model") {
    p.operators[0].model.reset();
    CHECK_FALSE(validate_pipeline(p).ok());
  }
  SUBCASE("LLM op with code body") {
    p.operators[0].code_body = "def f(doc): ...";
    CHECK_FALSE(validate_pipeline(p).ok());
  }
  SUBCASE("auxiliary op with model") {
    OperatorConfig sample;
    sample.id = "pick";
    sample.type = OperatorType::Sample;
    sample.sampling = SamplingSpec{SampleMethod::Random, 5, std::nullopt, {}};
    sample.model = "gpt-large";
    p.operators.push_back(std::move(sample));
    CHECK_FALSE(validate_pipeline(p).ok());
  }
  SUBCASE("duplicate ids") {
    p.operators.push_back(p.operators[0]);
    CHECK_FALSE(validate_pipeline(p).ok());
  }
  SUBCASE("empty pipeline") {
    p.operators.clear();
    auto report = validate_pipeline(p);
    REQUIRE_FALSE(report.ok());
    CHECK(report.violations[0].rule == "empty_pipeline");
  }
}

TEST_CASE("validate: sampling spec invariants") {
  PipelineSpec p = seed_single_map();
  OperatorConfig sample;
  sample.id = "pick";
  sample.type = OperatorType::Sample;
  SUBCASE("bm25 requires a query") {
    sample.sampling = SamplingSpec{SampleMethod::Bm25, 10, std::nullopt, {}};
    p.operators.push_back(sample);
    CHECK_FALSE(validate_pipeline(p).ok());
  }
  SUBCASE("stratified requires strata keys, which must exist") {
    sample.sampling = SamplingSpec{SampleMethod::Stratified, 10, std::nullopt, {"nope"}};
    p.operators.push_back(sample);
    CHECK_FALSE(validate_pipeline(p).ok());
  }
  SUBCASE("well-formed bm25 sample passes") {
    sample.sampling = SamplingSpec{SampleMethod::Bm25, 10, "firearm weapon", {}};
    p.operators.push_back(sample);
    CHECK(validate_pipeline(p).ok());
  }
}

TEST_CASE("available_keys_after threads schemas") {
  PipelineSpec p = seed_map_reduce();
  CHECK(available_keys_after(p, 0) == std::set<std::string>{"case_id", "case_type", "notes"});
  CHECK(available_keys_after(p, 1) ==
        std::set<std::string>{"case_id", "case_type", "factors", "notes"});
  // reduce semantics: group keys plus outputs survive, nothing else
  CHECK(available_keys_after(p, 2) == std::set<std::string>{"case_type", "summary"});
  CHECK_THROWS_AS((void)available_keys_after(p, 3), Error);
}

TEST_CASE("available_keys_after: split renames the chunked key") {
  PipelineSpec p = seed_chunked();
  auto after_split = available_keys_after(p, 1);
  CHECK(after_split == std::set<std::string>{"case_id", "notes_chunk"});
  auto after_gather = available_keys_after(p, 2);
  CHECK(after_gather == after_split);
}

TEST_CASE("estimate_cost: code-only pipeline costs exactly zero") {
  PipelineSpec p;
  p.name = "code_only";
  p.input_keys = {"notes"};
  OperatorConfig op;
  op.id = "c";
  op.type = OperatorType::CodeMap;
  op.code_body = "def f(doc): return {}";
  op.output_schema = {{"out", string_type()}};
  p.operators.push_back(std::move(op));
  WorkloadProfile profile;
  profile.catalog = small_catalog();
  profile.per_operator["c"] = {1000, 100, 10};
  CHECK(estimate_cost(p, profile).micros == 0);
}

TEST_CASE("estimate_cost: linear formula, hand-computed") {
  // one map, 1000 input + 100 output tokens/doc, 10 docs, prices (1e-6, 2e-6)
  PipelineSpec p;
  p.input_keys = {"notes"};
  p.operators.push_back(llm_op("m", OperatorType::Map, "Use {{ input.notes }}.",
                               {{"out", string_type()}}, "m1"));
  WorkloadProfile profile;
  profile.catalog.entries = {{"m1", "fam", 1e-6, 2e-6, 100000, 0.5}};
  profile.per_operator["m"] = {1000, 100, 10};
  CHECK(estimate_cost(p, profile).micros == 12000);  // $0.012

  SUBCASE("two identical maps cost exactly double") {
    auto op2 = p.operators[0];
    op2.id = "m2";
    p.operators.push_back(op2);
    profile.per_operator["m2"] = {1000, 100, 10};
    CHECK(estimate_cost(p, profile).micros == 24000);
  }
  SUBCASE("unknown model is an error") {
    p.operators[0].model = "missing";
    CHECK_THROWS_AS((void)estimate_cost(p, profile), Error);
  }
}

TEST_CASE("estimate_cost: parallel_map sums over branches") {
  PipelineSpec p = seed_parallel();
  WorkloadProfile profile;
  profile.catalog = small_catalog();
  profile.per_operator["facets"] = {1000, 100, 10};
  // two branches, each 10 * (1000*1e-5 + 100*3e-5) = 0.13
  CHECK(estimate_cost(p, profile).micros == 260000);
  profile.per_operator["facets#1"] = {500, 50, 10};
  CHECK(estimate_cost(p, profile).micros == 130000 + 65000);
}

TEST_CASE("canonical_serialize: ids excluded, fields and key order included") {
  PipelineSpec a = seed_map_filter();
  PipelineSpec b = a;
  b.operators[0].id = "renamed";
  b.operators[1].id = "also_renamed";
  CHECK(canonical_serialize(a) == canonical_serialize(b));
  CHECK(pipeline_key(a) == pipeline_key(b));

  SUBCASE("one prompt character flips the bytes") {
    b.operators[0].prompt += "!";
    CHECK(canonical_serialize(a) != canonical_serialize(b));
  }
  SUBCASE("model changes flip the bytes") {
    b.operators[0].model = "gpt-mid";
    CHECK(canonical_serialize(a) != canonical_serialize(b));
  }
  SUBCASE("delimiter characters in prompts stay injective") {
    PipelineSpec x = seed_single_map();
    PipelineSpec y = seed_single_map();
    x.operators[0].prompt = "a;b=c";
    y.operators[0].prompt = "a;b%3dc";
    CHECK(canonical_serialize(x) != canonical_serialize(y));
  }
}

TEST_CASE("pipeline YAML round-trips through canonical equality") {
  for (const auto& p : seed_corpus()) {
    std::string yaml = pipeline_to_yaml(p);
    PipelineSpec back = pipeline_from_yaml(yaml);
    CHECK(canonical_serialize(back) == canonical_serialize(p));
    CHECK(back.input_keys == p.input_keys);
    CHECK(back.name == p.name);
    for (size_t i = 0; i < p.operators.size(); ++i)
      CHECK(back.operators[i].id == p.operators[i].id);
  }
}

TEST_CASE("catalog YAML round-trip and invariants") {
  ModelCatalog c = small_catalog();
  ModelCatalog back = catalog_from_yaml(catalog_to_yaml(c));
  REQUIRE(back.entries.size() == c.entries.size());
  CHECK(back.entries[0].model_id == "gpt-large");
  CHECK(back.entries[2].input_price_per_token == doctest::Approx(1.5e-7));

  SUBCASE("duplicate ids rejected") {
    c.entries.push_back(c.entries[0]);
    CHECK_THROWS_AS(c.check(), Error);
  }
  SUBCASE("negative price rejected") {
    c.entries[0].input_price_per_token = -1;
    CHECK_THROWS_AS(c.check(), Error);
  }
}

TEST_CASE("schema type syntax parses and canonicalizes") {
  CHECK(ValueType::parse("str").to_string() == "string");
  CHECK(ValueType::parse("list[str]").to_string() == "list[string]");
  CHECK(ValueType::parse("list[{factor: str, evidence: str}]").to_string() ==
        "list[{evidence, factor}]");
  CHECK(ValueType::parse("list[{b, a}]") == ValueType::parse("list[{a, b}]"));
  CHECK_THROWS_AS((void)ValueType::parse("map[str]"), Error);
}
