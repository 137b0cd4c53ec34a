#include <doctest.h>

#include <algorithm>

#include "errors.hpp"
#include "pareto.hpp"
#include "util.hpp"

using namespace moar;

namespace {

EvalPoint pt(const std::string& key, int64_t micros, double acc) {
  return EvalPoint{key, Money{micros}, acc};
}

// Brute-force O(n^2) domination oracle, the spec's definition verbatim.
std::vector<EvalPoint> oracle_pareto(const std::vector<EvalPoint>& points) {
  std::vector<EvalPoint> out;
  for (size_t i = 0; i < points.size(); ++i) {
    bool dominated = false;
    for (size_t j = 0; j < points.size() && !dominated; ++j) {
      if (j == i) continue;
      dominated = points[j].accuracy > points[i].accuracy && points[j].cost <= points[i].cost;
    }
    if (!dominated) out.push_back(points[i]);
  }
  return out;
}

double oracle_ceiling(const std::vector<EvalPoint>& points, const EvalPoint& p) {
  std::vector<EvalPoint> rest;
  bool skipped = false;
  for (const auto& q : points) {
    if (!skipped && q.pipeline_key == p.pipeline_key) {
      skipped = true;
      continue;
    }
    rest.push_back(q);
  }
  double best = 0.0;
  for (const auto& q : oracle_pareto(rest))
    if (q.cost <= p.cost) best = std::max(best, q.accuracy);
  return best;
}

std::vector<std::string> keys_of(const std::vector<EvalPoint>& pts) {
  std::vector<std::string> keys;
  for (const auto& p : pts) keys.push_back(p.pipeline_key);
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace

TEST_CASE("pareto_set: spec examples") {
  auto a = pt("a", 1, 0.5), b = pt("b", 2, 0.7), c = pt("c", 3, 0.6);
  CHECK(keys_of(pareto_set({a, b, c})) == std::vector<std::string>{"a", "b"});
  CHECK(keys_of(pareto_set({a})) == std::vector<std::string>{"a"});
  // strict accuracy: equal-accuracy points at different costs both survive
  auto d = pt("d", 2, 0.5);
  CHECK(keys_of(pareto_set({a, d})) == std::vector<std::string>{"a", "d"});
}

TEST_CASE("ceiling_accuracy and delta: spec examples") {
  std::vector<EvalPoint> pts{pt("a", 1, 0.5), pt("b", 2, 0.7), pt("c", 3, 0.6)};
  CHECK(ceiling_accuracy(pts, pts[1]) == doctest::Approx(0.5));
  CHECK(delta(pts, pts[1]) == doctest::Approx(0.2));
  CHECK(delta(pts, pts[2]) == doctest::Approx(-0.1));
  // unique cheapest point: empty comparison set falls back to 0
  CHECK(ceiling_accuracy(pts, pts[0]) == doctest::Approx(0.0));
  CHECK(delta(pts, pts[0]) == doctest::Approx(0.5));
  CHECK_THROWS_AS((void)ceiling_accuracy(pts, pt("zz", 1, 0.1)), Error);
}

TEST_CASE("pareto: dominated point's ceiling comes from the dominator") {
  std::vector<EvalPoint> pts{pt("dom", 1, 0.8), pt("p", 2, 0.3)};
  CHECK(ceiling_accuracy(pts, pts[1]) == doctest::Approx(0.8));
}

TEST_CASE("accuracy clamps to [0,1] at construction") {
  CHECK(EvalPoint::make("x", Money{1}, 1.5).accuracy == doctest::Approx(1.0));
  CHECK(EvalPoint::make("x", Money{1}, -0.25).accuracy == doctest::Approx(0.0));
  CHECK(EvalPoint::make("x", Money{1}, 0.5).accuracy == doctest::Approx(0.5));
}

TEST_CASE("pareto oracle equivalence on random sets") {
  Rng rng(0xA11CE);
  for (int trial = 0; trial < 300; ++trial) {
    size_t n = 1 + rng.index(60);
    std::vector<EvalPoint> pts;
    for (size_t i = 0; i < n; ++i) {
      // small integer grids force plenty of exact cost/accuracy ties
      int64_t cost = int64_t(rng.index(20));
      double acc = double(rng.index(11)) / 10.0;
      pts.push_back(pt("k" + std::to_string(i), cost, acc));
    }
    CHECK(keys_of(pareto_set(pts)) == keys_of(oracle_pareto(pts)));
    const EvalPoint& probe = pts[rng.index(pts.size())];
    CHECK(ceiling_accuracy(pts, probe) == doctest::Approx(oracle_ceiling(pts, probe)));
  }
}

TEST_CASE("pareto_set is idempotent and order-independent") {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<EvalPoint> pts;
    size_t n = 1 + rng.index(40);
    for (size_t i = 0; i < n; ++i)
      pts.push_back(pt("k" + std::to_string(i), int64_t(rng.index(12)),
                       double(rng.index(9)) / 8.0));
    auto front = pareto_set(pts);
    CHECK(keys_of(pareto_set(front)) == keys_of(front));
    std::vector<EvalPoint> shuffled = pts;
    for (size_t i = shuffled.size(); i > 1; --i)
      std::swap(shuffled[i - 1], shuffled[rng.index(i)]);
    CHECK(keys_of(pareto_set(shuffled)) == keys_of(front));
  }
}

TEST_CASE("delta > 0 implies membership in the pareto set") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<EvalPoint> pts;
    size_t n = 2 + rng.index(30);
    for (size_t i = 0; i < n; ++i)
      pts.push_back(pt("k" + std::to_string(i), int64_t(rng.index(15)),
                       double(rng.index(12)) / 11.0));
    auto front_keys = keys_of(pareto_set(pts));
    for (const auto& p : pts) {
      if (delta(pts, p) > 0)
        CHECK(std::binary_search(front_keys.begin(), front_keys.end(), p.pipeline_key));
    }
  }
}

TEST_CASE("ceiling_accuracy is monotone in the probe's cost") {
  std::vector<EvalPoint> pts{pt("a", 1, 0.4), pt("b", 3, 0.6), pt("c", 5, 0.9),
                             pt("p", 4, 0.1)};
  double prev = -1.0;
  for (int64_t cost = 0; cost <= 8; ++cost) {
    std::vector<EvalPoint> with_probe = pts;
    with_probe[3] = pt("p", cost, 0.1);
    double ceiling = ceiling_accuracy(with_probe, with_probe[3]);
    CHECK(ceiling >= prev);
    prev = ceiling;
  }
}
