// Copyright 2026 The gbasim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gbasim/topology.hpp"

#include <gtest/gtest.h>

namespace gbasim {
namespace {

TEST(TopologyTest, ContiguousSplit) {
  const Topology topo = make_topology(8, 4);
  ASSERT_EQ(topo.num_groups(), 2u);
  EXPECT_EQ(topo.group(0), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(topo.group(1), (std::vector<std::size_t>{4, 5, 6, 7}));
  EXPECT_EQ(topo.group_of(5), 1u);
  EXPECT_EQ(topo.local_rank(5), 1u);
}

TEST(TopologyTest, SingleGroupHoldsEveryRank) {
  const Topology topo = make_topology(8, 8);
  ASSERT_EQ(topo.num_groups(), 1u);
  EXPECT_EQ(topo.group(0).size(), 8u);
}

TEST(TopologyTest, NonDivisibleNamesBothValues) {
  try {
    make_topology(8, 3);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find('8'), std::string::npos);
    EXPECT_NE(what.find('3'), std::string::npos);
  }
  EXPECT_THROW(make_topology(0, 1), std::invalid_argument);
  EXPECT_THROW(make_topology(4, 0), std::invalid_argument);
}

TEST(TopologyTest, GroupsPartitionRanksForEveryDivisor) {
  for (std::size_t world = 1; world <= 16; ++world) {
    for (std::size_t group = 1; group <= world; ++group) {
      if (world % group != 0) continue;
      const Topology topo = make_topology(world, group);
      std::size_t expected = 0;
      for (const auto& members : topo.groups()) {
        EXPECT_EQ(members.size(), group);
        for (std::size_t rank : members) {
          EXPECT_EQ(rank, expected++);
          EXPECT_EQ(topo.group(topo.group_of(rank))[topo.local_rank(rank)], rank);
        }
      }
      EXPECT_EQ(expected, world);
    }
  }
}

TEST(StrategyTest, KindRoundTrip) {
  for (StrategyKind k : {StrategyKind::kConventionalITC, StrategyKind::kGroupedITC, StrategyKind::kGBAITC}) {
    EXPECT_EQ(parse_strategy_kind(to_string(k)), k);
  }
  EXPECT_EQ(parse_strategy_kind("GBA-ITC"), StrategyKind::kGBAITC);
  EXPECT_THROW(parse_strategy_kind("ring"), std::invalid_argument);
}

TEST(StrategyTest, KindInvariants) {
  validate(StrategyConfig{StrategyKind::kConventionalITC, 4, 8, 1}, 8);
  EXPECT_THROW(validate(StrategyConfig{StrategyKind::kConventionalITC, 4, 4, 1}, 8), std::invalid_argument);
  EXPECT_THROW(validate(StrategyConfig{StrategyKind::kConventionalITC, 4, 8, 2}, 8), std::invalid_argument);
  validate(StrategyConfig{StrategyKind::kGroupedITC, 4, 2, 1}, 8);
  EXPECT_THROW(validate(StrategyConfig{StrategyKind::kGroupedITC, 4, 2, 2}, 8), std::invalid_argument);
  validate(StrategyConfig{StrategyKind::kGBAITC, 4, 2, 4}, 8);
  EXPECT_THROW(validate(StrategyConfig{StrategyKind::kGBAITC, 4, 3, 1}, 8), std::invalid_argument);
  EXPECT_THROW(validate(StrategyConfig{StrategyKind::kGBAITC, 0, 2, 1}, 8), std::invalid_argument);
  EXPECT_THROW(validate(StrategyConfig{StrategyKind::kGBAITC, 4, 2, 0}, 8), std::invalid_argument);
}

TEST(StrategyTest, ScaledTableShapesShareEffectiveBatch) {
  const StrategyConfig conventional{StrategyKind::kConventionalITC, 8, 8, 1};
  const StrategyConfig grouped{StrategyKind::kGroupedITC, 16, 4, 1};
  const StrategyConfig gba{StrategyKind::kGBAITC, 16, 2, 2};
  EXPECT_EQ(conventional.effective_batch(), 64u);
  EXPECT_EQ(grouped.effective_batch(), 64u);
  EXPECT_EQ(gba.effective_batch(), 64u);
  EXPECT_EQ(conventional.samples_per_step(8), 64u);
  EXPECT_EQ(grouped.samples_per_step(8), 128u);
  EXPECT_EQ(gba.samples_per_step(8), 256u);
}

}  // namespace
}  // namespace gbasim
