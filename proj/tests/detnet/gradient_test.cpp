#include <gtest/gtest.h>

#include "gradcheck.hpp"

namespace slapseg::det {
namespace {

TEST(GradientCheck, EveryOperation) {
  for (const auto& c : testing::run_op_gradient_checks(7)) {
    EXPECT_LT(c.worst, 1e-4) << c.name;
    EXPECT_GT(c.checked, 0u) << c.name;
  }
}

TEST(GradientCheck, OtherSeedsToo) {
  for (std::uint64_t seed : {11u, 12u}) {
    for (const auto& c : testing::run_op_gradient_checks(seed)) EXPECT_LT(c.worst, 1e-4) << c.name << " seed " << seed;
  }
}

TEST(GradientCheck, FullNetwork) {
  const auto c = testing::check_full_network(5);
  EXPECT_LT(c.worst, 1e-3);
  EXPECT_GT(c.checked, 100u);
}

}  // namespace
}  // namespace slapseg::det
