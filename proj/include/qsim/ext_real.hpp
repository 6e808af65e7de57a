#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "qsim/errors.hpp"

namespace qsim {

// Extended real: a finite double or a signed infinity, kept as an explicit
// tag rather than an IEEE special or a large sentinel. Integrals against a
// measure and the mean offspring number m(r) take values here.
class ExtReal {
 public:
  ExtReal() : tag_(Tag::Finite), value_(0.0) {}

  static ExtReal finite(double v) {
    if (!std::isfinite(v)) throw DomainError("ExtReal::finite: value is not finite");
    ExtReal e;
    e.tag_ = Tag::Finite;
    e.value_ = v;
    return e;
  }
  static ExtReal pos_inf() {
    ExtReal e;
    e.tag_ = Tag::PosInf;
    return e;
  }
  static ExtReal neg_inf() {
    ExtReal e;
    e.tag_ = Tag::NegInf;
    return e;
  }

  bool is_finite() const { return tag_ == Tag::Finite; }
  bool is_pos_inf() const { return tag_ == Tag::PosInf; }
  bool is_neg_inf() const { return tag_ == Tag::NegInf; }

  // Finite value; throws on infinities.
  double value() const {
    if (!is_finite()) throw DomainError("ExtReal::value: not finite");
    return value_;
  }

  // Double view with IEEE infinities, for comparisons and formatting.
  double as_double() const {
    switch (tag_) {
      case Tag::PosInf: return std::numeric_limits<double>::infinity();
      case Tag::NegInf: return -std::numeric_limits<double>::infinity();
      default: return value_;
    }
  }

  ExtReal operator+(const ExtReal& o) const {
    if (is_finite() && o.is_finite()) return finite(value_ + o.value_);
    if ((is_pos_inf() && o.is_neg_inf()) || (is_neg_inf() && o.is_pos_inf()))
      throw DomainError("ExtReal: inf - inf is undefined");
    return is_finite() ? o : *this;
  }
  ExtReal& operator+=(const ExtReal& o) { return *this = *this + o; }

  // Scale by a positive finite factor.
  ExtReal scaled(double c) const {
    if (!(std::isfinite(c) && c > 0.0)) throw DomainError("ExtReal::scaled: factor must be positive finite");
    return is_finite() ? finite(value_ * c) : *this;
  }

  friend bool operator==(const ExtReal& a, const ExtReal& b) {
    return a.tag_ == b.tag_ && (a.tag_ != Tag::Finite || a.value_ == b.value_);
  }
  friend bool operator>(const ExtReal& a, double b) { return a.as_double() > b; }
  friend bool operator<(const ExtReal& a, double b) { return a.as_double() < b; }
  friend bool operator>=(const ExtReal& a, double b) { return a.as_double() >= b; }
  friend bool operator<=(const ExtReal& a, double b) { return a.as_double() <= b; }

  // "inf" / "-inf" for infinities; finite values formatted by the caller.
  std::string tag_string() const {
    if (is_pos_inf()) return "inf";
    if (is_neg_inf()) return "-inf";
    return "finite";
  }

 private:
  enum class Tag { Finite, PosInf, NegInf };
  Tag tag_;
  double value_ = 0.0;
};

}  // namespace qsim
