#pragma once

namespace purc {

/// Kahan compensated accumulator; keeps link sums accurate enough for the
/// 1e-8 duality-gap assertions on large networks.
class KahanSum {
 public:
  void add(double x) {
    double y = x - c_;
    double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

}  // namespace purc
