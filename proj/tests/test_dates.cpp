#include <gtest/gtest.h>

#include "panelci/dates.hpp"

using namespace panelci;

TEST(Dates, ParsesPlainDate) {
  Day d = parse_day("2022-06-01");
  EXPECT_EQ(format_day(d), "2022-06-01");
}

TEST(Dates, TimestampsMapToUtcStartDay) {
  EXPECT_EQ(format_day(parse_day("2022-06-01T23:30:00Z")), "2022-06-01");
  EXPECT_EQ(format_day(parse_day("2022-06-01T23:30:00-02:00")), "2022-06-02");
  EXPECT_EQ(format_day(parse_day("2022-06-01T00:30:00+01:00")), "2022-05-31");
  EXPECT_EQ(format_day(parse_day("2022-06-01 10:00")), "2022-06-01");
}

TEST(Dates, RejectsMalformed) {
  Day d;
  EXPECT_FALSE(try_parse_day("2022-13-01", d));
  EXPECT_FALSE(try_parse_day("2022-02-30", d));
  EXPECT_FALSE(try_parse_day("22-06-01", d));
  EXPECT_FALSE(try_parse_day("2022-06-01Tnoon", d));
  EXPECT_THROW(parse_day("yesterday"), ValidationError);
}

TEST(Dates, WindowLengthIsInclusive) {
  DateWindow w{parse_day("2022-01-01"), parse_day("2022-07-11")};
  EXPECT_EQ(w.length(), 192u);
  EXPECT_TRUE(w.contains(parse_day("2022-07-11")));
  EXPECT_FALSE(w.contains(parse_day("2022-07-12")));
}
