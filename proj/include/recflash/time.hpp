#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <stdexcept>

namespace recflash {

// Simulation time. Kept as integer picoseconds so that event-driven schedules
// and closed-form sums agree exactly regardless of evaluation order.
class Picoseconds {
 public:
  constexpr Picoseconds() = default;
  constexpr explicit Picoseconds(std::int64_t ps) : ps_(ps) {}

  static Picoseconds from_us(double us) {
    if (!std::isfinite(us)) throw std::invalid_argument("time value is not finite");
    return Picoseconds(static_cast<std::int64_t>(std::llround(us * 1e6)));
  }

  constexpr std::int64_t count() const { return ps_; }
  double us() const { return static_cast<double>(ps_) / 1e6; }

  constexpr Picoseconds& operator+=(Picoseconds o) {
    ps_ += o.ps_;
    return *this;
  }
  constexpr Picoseconds& operator-=(Picoseconds o) {
    ps_ -= o.ps_;
    return *this;
  }
  friend constexpr Picoseconds operator+(Picoseconds a, Picoseconds b) { return Picoseconds(a.ps_ + b.ps_); }
  friend constexpr Picoseconds operator-(Picoseconds a, Picoseconds b) { return Picoseconds(a.ps_ - b.ps_); }
  friend constexpr Picoseconds operator*(Picoseconds a, std::int64_t k) { return Picoseconds(a.ps_ * k); }
  friend constexpr Picoseconds operator*(std::int64_t k, Picoseconds a) { return Picoseconds(a.ps_ * k); }
  friend constexpr auto operator<=>(Picoseconds, Picoseconds) = default;

 private:
  std::int64_t ps_ = 0;
};

constexpr Picoseconds max(Picoseconds a, Picoseconds b) { return a < b ? b : a; }

}  // namespace recflash
