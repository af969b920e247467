// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <string>

#include "promptseg/error.hpp"
#include "seed_file.hpp"

namespace promptseg::cli {
namespace {

TEST(SeedCsv, PointsBoxesAndSlices) {
  const auto rows = parse_seed_csv(
      "kind,x,y,w,h,slice\n"
      "# two discs\n"
      "point,10,20\n"
      "\n"
      "box,1,2,30,40\n"
      "point,5,6,3\n"
      "box,0,0,8,8,2\n");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].line, 3);
  EXPECT_EQ(rows[0].seed, Seed::at(10, 20));
  EXPECT_EQ(rows[1].seed, Seed::boxed({1, 2, 30, 40}));
  EXPECT_EQ(rows[1].slice, 0);
  EXPECT_EQ(rows[2].slice, 3);
  EXPECT_EQ(rows[3].slice, 2);
  EXPECT_EQ(rows[3].line, 7);
}

TEST(SeedCsv, ToleratesSpacesAndCrLf) {
  const auto rows = parse_seed_csv("point, 10 , 20\r\nbox ,1,2,3,4\r\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].seed, Seed::at(10, 20));
}

TEST(SeedCsv, MalformedRowsNameTheLine) {
  for (const std::string bad : {"point,1\n", "box,1,2,3\n", "circle,1,2\n", "point,a,2\n",
                                "point,1,2,3,4\n", "box,1,2,3,4,5,6\n"}) {
    try {
      parse_seed_csv("point,0,0\n" + bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidArgument) << bad;
      EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
  }
}

TEST(SeedCsv, MissingFile) {
  EXPECT_THROW(read_seed_file("/nonexistent/seeds.csv"), Error);
}

}  // namespace
}  // namespace promptseg::cli
