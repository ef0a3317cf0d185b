#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string_view>

#include "twosided/error.hpp"

namespace twosided {

enum class ScheduleKind { exponential, polynomial };

inline std::string_view schedule_kind_name(ScheduleKind k) {
  return k == ScheduleKind::exponential ? "exponential" : "polynomial";
}

// Epoch lengths for CA-ETC.
//   exponential: explore(l) = 2^l T0,  horizon(l) = ceil(b^l T0)
//   polynomial:  explore(l) = l^2 T0,  horizon(l) = ceil(l^b T0)
// with b = 2^{1/gamma}. The polynomial exponent can be overridden (e.g. 2/gamma).
class EpochSchedule {
 public:
  EpochSchedule() : EpochSchedule(ScheduleKind::exponential, 500, 0.4) {}

  EpochSchedule(ScheduleKind kind, std::int64_t t0, double gamma,
                std::optional<double> poly_exponent = std::nullopt)
      : kind_(kind), t0_(t0), gamma_(gamma), poly_exponent_(poly_exponent) {
    if (t0_ < 1) throw ConfigError("T0 must be a positive integer");
    if (!(gamma_ > 0.0 && gamma_ < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
    if (kind_ == ScheduleKind::polynomial && !(b() >= 2.0)) {
      throw ConfigError("polynomial schedule needs exponent b >= 2 so that horizon >= exploration");
    }
  }

  ScheduleKind kind() const noexcept { return kind_; }
  std::int64_t t0() const noexcept { return t0_; }
  double gamma() const noexcept { return gamma_; }
  std::optional<double> poly_exponent() const noexcept { return poly_exponent_; }

  double b() const {
    if (kind_ == ScheduleKind::polynomial && poly_exponent_) return *poly_exponent_;
    return std::exp2(1.0 / gamma_);
  }

  std::int64_t explore(int l) const {
    if (kind_ == ScheduleKind::exponential) return saturate(std::exp2(static_cast<double>(l)) * double(t0_));
    return saturate(double(l) * double(l) * double(t0_));
  }

  std::int64_t horizon(int l) const {
    double len = 0.0;
    if (kind_ == ScheduleKind::exponential) {
      len = std::exp2(static_cast<double>(l) / gamma_) * double(t0_);
    } else {
      len = std::pow(static_cast<double>(l), b()) * double(t0_);
    }
    // Lengths within 1e-9 relative of an integer are taken as that integer so
    // that exact cases (b^l T0 integral) do not round up on representation error.
    const double nearest = std::round(len);
    if (std::abs(len - nearest) <= 1e-9 * len) len = nearest;
    return std::max(saturate(std::ceil(len)), explore(l));
  }

  bool operator==(const EpochSchedule&) const = default;

 private:
  static std::int64_t saturate(double v) {
    constexpr double kMax = 4.0e18;
    return v >= kMax ? static_cast<std::int64_t>(kMax) : static_cast<std::int64_t>(v);
  }

  ScheduleKind kind_;
  std::int64_t t0_;
  double gamma_;
  std::optional<double> poly_exponent_;
};

}  // namespace twosided
