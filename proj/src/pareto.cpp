#include "pareto.hpp"

#include <algorithm>
#include <cstdio>

#include "errors.hpp"

namespace moar {

EvalPoint EvalPoint::make(std::string key, Money cost, double accuracy) {
  double clamped = std::clamp(accuracy, 0.0, 1.0);
  if (clamped != accuracy) {
    std::fprintf(stderr, "[moar] warning: accuracy %.6f clamped to [0,1] for %s\n",
                 accuracy, key.c_str());
  }
  return EvalPoint{std::move(key), cost, clamped};
}

namespace {

bool dominates(const EvalPoint& a, const EvalPoint& b) {
  return a.accuracy > b.accuracy && a.cost <= b.cost;
}

}  // namespace

std::vector<EvalPoint> pareto_set(const std::vector<EvalPoint>& points) {
  // Sort indices by (cost asc, accuracy desc); one sweep tracking the best
  // accuracy seen at lower-or-equal cost decides domination.
  std::vector<size_t> order(points.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (points[a].cost != points[b].cost) return points[a].cost < points[b].cost;
    return points[a].accuracy > points[b].accuracy;
  });
  std::vector<bool> keep(points.size(), true);
  double best_acc = -1.0;
  for (size_t idx : order) {
    if (points[idx].accuracy <= best_acc)
      keep[idx] = false;  // some cheaper-or-equal point is strictly more accurate
    else
      best_acc = points[idx].accuracy;
  }
  // Equal (cost, accuracy) duplicates: the sweep keeps only the first, but
  // neither strictly dominates the other, so both survive by definition.
  for (size_t i = 0; i < points.size(); ++i) {
    if (keep[i]) continue;
    bool dominated = false;
    for (size_t j = 0; j < points.size() && !dominated; ++j)
      dominated = j != i && dominates(points[j], points[i]);
    keep[i] = !dominated;
  }
  std::vector<EvalPoint> out;
  for (size_t i = 0; i < points.size(); ++i)
    if (keep[i]) out.push_back(points[i]);
  return out;
}

double ceiling_accuracy(const std::vector<EvalPoint>& points, const EvalPoint& p) {
  std::vector<EvalPoint> rest;
  rest.reserve(points.size());
  bool found = false;
  for (const auto& q : points) {
    if (!found && q.pipeline_key == p.pipeline_key) {
      found = true;  // exclude one instance of P itself
      continue;
    }
    rest.push_back(q);
  }
  if (!found) fail(ErrorKind::PointNotFound, "point not in set: " + p.pipeline_key);
  double best = 0.0;  // empty-max fallback
  for (const auto& q : pareto_set(rest))
    if (q.cost <= p.cost) best = std::max(best, q.accuracy);
  return best;
}

double delta(const std::vector<EvalPoint>& points, const EvalPoint& p) {
  return p.accuracy - ceiling_accuracy(points, p);
}

}  // namespace moar
