#include <gtest/gtest.h>

#include <map>
#include <set>

#include "slapseg/common/error.hpp"
#include "slapseg/synthgen/splits.hpp"

namespace slapseg::synth {
namespace {

// Splits only look at subjects, so no images are needed.
DatasetManifest roster(int adults, int juveniles) {
  DatasetManifest m;
  for (int i = 0; i < adults + juveniles; ++i) {
    SubjectRecord s;
    s.subject_id = (i < adults ? "A" : "J") + std::to_string(1000 + i);
    s.cohort = i < adults ? Cohort::kAdult : Cohort::kJuvenile;
    m.subjects.push_back(s);
  }
  return m;
}

TEST(MakeSplits, TenPerCohortGivesEightOneOne) {
  const auto splits = make_splits(roster(10, 10), 10, 3);
  ASSERT_EQ(splits.size(), 10u);
  for (const SplitAssignment& s : splits) {
    for (char cohort : {'A', 'J'}) {
      std::map<Partition, int> n;
      for (const auto& [id, p] : s.partition) {
        if (id[0] == cohort) ++n[p];
      }
      EXPECT_EQ(n[Partition::kTrain], 8);
      EXPECT_EQ(n[Partition::kValidation], 1);
      EXPECT_EQ(n[Partition::kTest], 1);
    }
  }
}

TEST(MakeSplits, PartitionsCoverEverySubjectOnce) {
  const DatasetManifest m = roster(23, 37);
  const auto splits = make_splits(m, 10, 9);
  std::map<std::string, int> tested;
  for (const SplitAssignment& s : splits) {
    ASSERT_EQ(s.partition.size(), m.subjects.size());
    std::set<std::string> seen;
    for (Partition p : {Partition::kTrain, Partition::kValidation, Partition::kTest}) {
      for (const std::string& id : s.subjects(p)) EXPECT_TRUE(seen.insert(id).second) << id;
    }
    EXPECT_EQ(seen.size(), m.subjects.size());
    for (const std::string& id : s.subjects(Partition::kTest)) ++tested[id];
  }
  ASSERT_EQ(tested.size(), m.subjects.size());
  for (const auto& [id, n] : tested) EXPECT_EQ(n, 1) << id;
}

TEST(MakeSplits, ProportionsWithinRounding) {
  const auto splits = make_splits(roster(203, 242), 10, 1);
  for (const SplitAssignment& s : splits) {
    int adult_val = 0;
    int adult_test = 0;
    for (const auto& [id, p] : s.partition) {
      if (id[0] != 'A') continue;
      adult_val += p == Partition::kValidation;
      adult_test += p == Partition::kTest;
    }
    EXPECT_GE(adult_val, 20);
    EXPECT_LE(adult_val, 21);
    EXPECT_GE(adult_test, 20);
    EXPECT_LE(adult_test, 21);
  }
}

TEST(MakeSplits, SeedDeterminesAssignment) {
  const DatasetManifest m = roster(20, 20);
  EXPECT_EQ(make_splits(m, 10, 5), make_splits(m, 10, 5));
  EXPECT_NE(make_splits(m, 10, 5), make_splits(m, 10, 6));
}

TEST(MakeSplits, TooFewSubjectsIsValidationError) {
  EXPECT_THROW(make_splits(roster(9, 12), 10, 1), ValidationError);
}

TEST(MakeSplits, JsonRoundTrip) {
  const auto splits = make_splits(roster(12, 10), 10, 2);
  EXPECT_EQ(splits_from_json(splits_to_json(splits)), splits);
  EXPECT_THROW(splits_from_json("{\"folds\": [{\"fold\": 0, \"partition\": {\"A\": \"holdout\"}}]}"), ParseError);
}

}  // namespace
}  // namespace slapseg::synth
