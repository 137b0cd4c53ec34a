#pragma once

#include <cmath>
#include <compare>
#include <cstdint>

namespace moar {

/// Monetary amount in integer micro-dollars. Frontier domination is decided
/// with exact integer comparisons; floating point enters only at the edges
/// (price tables, display).
struct Money {
  int64_t micros = 0;

  static Money from_dollars(double d) { return Money{int64_t(std::llround(d * 1e6))}; }
  double dollars() const { return double(micros) * 1e-6; }

  Money operator+(Money o) const { return Money{micros + o.micros}; }
  Money& operator+=(Money o) { micros += o.micros; return *this; }
  auto operator<=>(const Money&) const = default;
};

}  // namespace moar
