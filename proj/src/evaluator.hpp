#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "ir.hpp"
#include "money.hpp"

namespace moar {

struct EvalResult {
  Money cost;
  double accuracy = 0.0;
  bool cache_hit = false;
  int candidate_index = -1;  // which instantiation produced this pipeline
};

/// Executes a pipeline on the optimization sample and scores it. The live
/// LLM-execution implementation is out of scope; the simulated evaluator and
/// fault-injection wrappers implement this interface.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual EvalResult evaluate(const PipelineSpec& p) = 0;
};

/// Canonical-serialization-keyed cache; a hit never reaches the inner
/// evaluator. Safe for concurrent use (get-or-insert under one lock).
class CachedEvaluator : public Evaluator {
 public:
  explicit CachedEvaluator(std::shared_ptr<Evaluator> inner) : inner_(std::move(inner)) {}

  EvalResult evaluate(const PipelineSpec& p) override {
    std::string key = pipeline_key(p);
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) {
      EvalResult hit = it->second;
      hit.cache_hit = true;
      return hit;
    }
    EvalResult fresh = inner_->evaluate(p);
    ++inner_calls_;
    fresh.cache_hit = false;
    cache_.emplace(std::move(key), fresh);
    return fresh;
  }

  std::optional<EvalResult> lookup(const std::string& canonical_key) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(canonical_key);
    if (it == cache_.end()) return std::nullopt;
    return it->second;
  }

  size_t inner_calls() const {
    std::lock_guard<std::mutex> lock(mu_);
    return inner_calls_;
  }

 private:
  std::shared_ptr<Evaluator> inner_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, EvalResult> cache_;
  size_t inner_calls_ = 0;
};

}  // namespace moar
