#include <gtest/gtest.h>

#include "twosided/schedule.hpp"

using namespace twosided;

TEST(EpochSchedule, ExponentialLengths) {
  const EpochSchedule s(ScheduleKind::exponential, 500, 0.4);
  EXPECT_EQ(s.explore(1), 1000);
  EXPECT_EQ(s.explore(3), 4000);
  // ceil(2^{l/0.4} * 500)
  const std::int64_t expected[] = {2829, 16000, 90510, 512000, 2896310};
  for (int l = 1; l <= 5; ++l) EXPECT_EQ(s.horizon(l), expected[l - 1]) << "epoch " << l;
}

TEST(EpochSchedule, PolynomialLengths) {
  const EpochSchedule s(ScheduleKind::polynomial, 500, 0.4);
  EXPECT_NEAR(s.b(), 5.656854249492381, 1e-12);
  EXPECT_EQ(s.explore(1), 500);
  EXPECT_EQ(s.explore(4), 8000);
  const std::int64_t expected[] = {500, 25227, 250021, 1272729, 4497193};
  for (int l = 1; l <= 5; ++l) EXPECT_EQ(s.horizon(l), expected[l - 1]) << "epoch " << l;

  const EpochSchedule five(ScheduleKind::polynomial, 500, 0.4, 5.0);
  const std::int64_t expected5[] = {500, 16000, 121500, 512000, 1562500};
  for (int l = 1; l <= 5; ++l) EXPECT_EQ(five.horizon(l), expected5[l - 1]) << "epoch " << l;
}

TEST(EpochSchedule, HorizonCoversExploration) {
  for (double g : {0.1, 0.25, 0.4, 0.6, 0.9}) {
    for (auto kind : {ScheduleKind::exponential, ScheduleKind::polynomial}) {
      const EpochSchedule s(kind, 37, g);
      for (int l = 1; l <= 12; ++l) EXPECT_GE(s.horizon(l), s.explore(l));
    }
  }
}

TEST(EpochSchedule, Validation) {
  EXPECT_THROW(EpochSchedule(ScheduleKind::exponential, 0, 0.4), ConfigError);
  EXPECT_THROW(EpochSchedule(ScheduleKind::exponential, 500, 0.0), ConfigError);
  EXPECT_THROW(EpochSchedule(ScheduleKind::exponential, 500, 1.0), ConfigError);
  EXPECT_THROW(EpochSchedule(ScheduleKind::polynomial, 500, 0.4, 1.5), ConfigError);
  EXPECT_NO_THROW(EpochSchedule(ScheduleKind::polynomial, 500, 0.4, 2.0 / 0.4));
}

TEST(EpochSchedule, SaturatesInsteadOfOverflowing) {
  const EpochSchedule s(ScheduleKind::exponential, 500, 0.1);
  EXPECT_GT(s.horizon(40), 0);
  EXPECT_GE(s.horizon(40), s.horizon(39));
}
