#pragma once

#include <cmath>
#include <compare>
#include <cstdint>

namespace ecount {

/// Energy quantity stored as integer microjoules so that budget sums and
/// comparisons are exact.
class Energy {
 public:
  constexpr Energy() = default;

  static Energy joules(double j) { return Energy(std::llround(j * 1e6)); }
  static constexpr Energy microjoules(std::int64_t uj) { return Energy(uj); }
  /// Inputs are configured in Wh/day; 1 Wh = 3600 J.
  static Energy watt_hours(double wh) { return joules(wh * 3600.0); }

  constexpr std::int64_t microjoules() const { return uj_; }
  constexpr double joules() const { return static_cast<double>(uj_) * 1e-6; }

  constexpr Energy& operator+=(Energy o) { uj_ += o.uj_; return *this; }
  constexpr Energy& operator-=(Energy o) { uj_ -= o.uj_; return *this; }
  friend constexpr Energy operator+(Energy a, Energy b) { return Energy(a.uj_ + b.uj_); }
  friend constexpr Energy operator-(Energy a, Energy b) { return Energy(a.uj_ - b.uj_); }
  friend constexpr Energy operator*(std::int64_t k, Energy e) { return Energy(k * e.uj_); }
  friend constexpr Energy operator*(Energy e, std::int64_t k) { return Energy(k * e.uj_); }
  friend constexpr auto operator<=>(Energy, Energy) = default;

 private:
  constexpr explicit Energy(std::int64_t uj) : uj_(uj) {}
  std::int64_t uj_ = 0;
};

}  // namespace ecount
