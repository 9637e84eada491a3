#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include <gtest/gtest.h>

#include "dpinn/util/error.hpp"

namespace dpinn::testing {

/// |a - b| within rel * max(|a|, |b|), or within abs near zero.
inline ::testing::AssertionResult near_rel(double a, double b, double rel = 1e-6, double abs = 1e-9) {
  const double diff = std::abs(a - b);
  if (diff <= abs || diff <= rel * std::max(std::abs(a), std::abs(b))) return ::testing::AssertionSuccess();
  return ::testing::AssertionFailure() << a << " vs " << b << " (diff " << diff << ")";
}

template <class Fn>
ErrorKind error_kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::unsupported;
}

}  // namespace dpinn::testing
