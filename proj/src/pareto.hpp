#pragma once

#include <string>
#include <vector>

#include "money.hpp"

namespace moar {

/// One evaluated pipeline: canonical-serialization hash plus empirical
/// (cost, accuracy). Accuracy is clamped to [0,1] at construction; a warning
/// is logged to stderr when clamping fires.
struct EvalPoint {
  std::string pipeline_key;
  Money cost;
  double accuracy = 0.0;

  static EvalPoint make(std::string key, Money cost, double accuracy);
};

/// Pareto set per the strict-accuracy definition: P survives iff no P' has
/// a(P') > a(P) and c(P') <= c(P). Equal-accuracy points at different costs
/// all survive. Input order does not matter; output preserves input order.
std::vector<EvalPoint> pareto_set(const std::vector<EvalPoint>& points);

/// Highest accuracy among Pareto(points \ {P}) at cost <= cost(P); 0 when no
/// such point exists. P is identified by pipeline_key and must be present
/// (throws Error(PointNotFound) otherwise).
double ceiling_accuracy(const std::vector<EvalPoint>& points, const EvalPoint& p);

/// Marginal frontier contribution: accuracy(P) - ceiling_accuracy(points, P).
double delta(const std::vector<EvalPoint>& points, const EvalPoint& p);

}  // namespace moar
