#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <sstream>

#include "../oracles/oracles.hpp"
#include "recflash/mapping_table.hpp"

using namespace recflash;

namespace {

const KeySpace kSpace(1, 100000);
VectorKey K(std::uint32_t r) { return {0, r}; }

FrequencyTable abcde(double x = 0.4) {
  // A..E are rows 1..5
  std::vector<KeyCount> kc = {{K(1), 10}, {K(2), 8}, {K(3), 6}, {K(4), 4}, {K(5), 2}};
  return FrequencyTable::build_from_counts(kSpace, kc, x);
}

std::vector<std::uint32_t> rows(const std::vector<VectorKey>& ks) {
  std::vector<std::uint32_t> out;
  for (auto k : ks) out.push_back(k.row);
  return out;
}

}  // namespace

TEST(ThresholdRank, Ceiling) {
  EXPECT_EQ(threshold_rank(5, 0.4), 2u);
  EXPECT_EQ(threshold_rank(30, 0.1), 3u);
  EXPECT_EQ(threshold_rank(10, 0.3), 3u);
  EXPECT_EQ(threshold_rank(7, 0.01), 1u);
  EXPECT_EQ(threshold_rank(7, 1.0), 7u);
  EXPECT_THROW(threshold_rank(7, 0.0), std::invalid_argument);
  EXPECT_THROW(threshold_rank(7, 1.5), std::invalid_argument);
}

TEST(FrequencyTable, BuildExample) {
  auto t = abcde();
  EXPECT_EQ(rows(t.order()), (std::vector<std::uint32_t>{1, 2, 3, 4, 5}));
  EXPECT_EQ(t.threshold()->row, 2u);
  EXPECT_EQ(t.threshold_prev()->row, 1u);
  EXPECT_EQ(t.hot_size(), 2u);
  t.audit();
}

TEST(FrequencyTable, SingleEntry) {
  std::vector<KeyCount> kc = {{K(9), 3}};
  auto t = FrequencyTable::build_from_counts(kSpace, kc, 0.01);
  EXPECT_EQ(t.head(), t.tail());
  EXPECT_EQ(t.head(), t.threshold());
  EXPECT_FALSE(t.threshold_prev());
}

TEST(FrequencyTable, EqualCountsKeyAscending) {
  std::vector<KeyCount> kc = {{K(7), 1}, {K(3), 1}, {K(5), 1}};
  auto t = FrequencyTable::build_from_counts(kSpace, kc, 0.5);
  EXPECT_EQ(rows(t.order()), (std::vector<std::uint32_t>{3, 5, 7}));
}

TEST(FrequencyTable, BuildErrors) {
  std::vector<KeyCount> none;
  EXPECT_THROW(FrequencyTable::build_from_counts(kSpace, none, 0.1), std::invalid_argument);
  std::vector<KeyCount> dup = {{K(1), 1}, {K(1), 2}};
  EXPECT_THROW(FrequencyTable::build_from_counts(kSpace, dup, 0.1), std::invalid_argument);
  std::vector<KeyCount> out = {{{1, 0}, 1}};
  EXPECT_THROW(FrequencyTable::build_from_counts(kSpace, out, 0.1), std::out_of_range);
}

TEST(FrequencyTable, BuildMatchesFullSortOnRandomInstances) {
  std::mt19937_64 rng(11);
  for (int it = 0; it < 10000; ++it) {
    const auto n = 1 + rng() % 60;
    std::set<std::uint32_t> used;
    std::vector<KeyCount> kc;
    while (kc.size() < n) {
      auto r = static_cast<std::uint32_t>(rng() % 500);
      if (used.insert(r).second) kc.push_back({K(r), rng() % 8});
    }
    auto ref = kc;
    std::sort(ref.begin(), ref.end(), [](auto& a, auto& b) { return a.count != b.count ? a.count > b.count : a.key < b.key; });
    auto t = FrequencyTable::build_from_counts(kSpace, kc, double(1 + rng() % 1000) / 1000.0);
    auto order = t.order();
    ASSERT_EQ(order.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_EQ(order[i], ref[i].key) << "instance " << it;
  }
}

TEST(FrequencyTable, DenseBuildSkipsZeroCounts) {
  std::vector<std::uint32_t> dense(kSpace.size(), 0);
  dense[4] = 3;
  dense[9] = 7;
  dense[2] = 3;
  auto t = FrequencyTable::build_from_dense_counts(kSpace, dense, 0.5);
  EXPECT_EQ(rows(t.order()), (std::vector<std::uint32_t>{9, 2, 4}));
  EXPECT_FALSE(t.contains(K(0)));
}

TEST(AdaptiveUpdate, InsertBeforeHead) {
  auto t = abcde();  // tau = B
  std::vector<KeyCount> trained = {{K(24), 11}};
  auto s = t.adaptive_update(trained);
  EXPECT_EQ(rows(t.order()), (std::vector<std::uint32_t>{24, 1, 3, 4, 5, 2}));
  EXPECT_EQ(t.threshold()->row, 1u);
  EXPECT_EQ(s.keys_inserted_hot, 1u);
  EXPECT_EQ(s.keys_appended_tail, 0u);
  EXPECT_EQ(rows(s.hot_region_keys_for_reassignment), (std::vector<std::uint32_t>{24, 1}));
  t.audit();
}

// The scan stops when ptr reaches tau, so tau itself is never compared:
// 9 beats B (8) but B is the threshold, and A (10) is not beaten.
TEST(AdaptiveUpdate, ThresholdKeyIsNotCompared) {
  auto t = abcde();
  std::vector<KeyCount> trained = {{K(24), 9}};
  auto s = t.adaptive_update(trained);
  EXPECT_EQ(rows(t.order()), (std::vector<std::uint32_t>{1, 2, 3, 4, 5, 24}));
  EXPECT_EQ(t.threshold()->row, 2u);
  EXPECT_EQ(s.keys_appended_tail, 1u);
  EXPECT_EQ(rows(s.direct_assignments), (std::vector<std::uint32_t>{24}));
}

TEST(AdaptiveUpdate, EmptyTrainedKeepsOrder) {
  auto t = abcde();
  auto before = t.order();
  auto s = t.adaptive_update({});
  EXPECT_EQ(t.order(), before);
  EXPECT_EQ(s.keys_inserted_hot + s.keys_appended_tail + s.comparisons, 0u);
  // hot region [head, tau] is still reassigned
  EXPECT_EQ(rows(s.hot_region_keys_for_reassignment), (std::vector<std::uint32_t>{1, 2}));
  EXPECT_TRUE(s.direct_assignments.empty());
}

TEST(AdaptiveUpdate, LowCountAppendsAtTail) {
  auto t = abcde();
  std::vector<KeyCount> trained = {{K(25), 1}};  // Y
  auto s = t.adaptive_update(trained);
  EXPECT_EQ(rows(t.order()), (std::vector<std::uint32_t>{1, 2, 3, 4, 5, 25}));
  EXPECT_EQ(t.threshold()->row, 2u);
  EXPECT_EQ(s.keys_appended_tail, 1u);
  EXPECT_EQ(rows(s.direct_assignments), (std::vector<std::uint32_t>{25}));
}

TEST(AdaptiveUpdate, TieDoesNotInsert) {
  auto t = abcde(0.6);  // tau = C
  std::vector<KeyCount> trained = {{K(30), 8}, {K(31), 9}};
  t.adaptive_update(trained);
  // 8 is not > 8 so key 30 goes to the tail; 9 > 8 puts key 31 before B
  EXPECT_EQ(rows(t.order()), (std::vector<std::uint32_t>{1, 31, 2, 4, 5, 30, 3}));
  EXPECT_EQ(t.threshold()->row, 2u);
  t.audit();
}

TEST(AdaptiveUpdate, DuplicateTrainedKeysRejected) {
  auto t = abcde();
  std::vector<KeyCount> trained = {{K(40), 3}, {K(40), 4}};
  EXPECT_THROW(t.adaptive_update(trained), std::invalid_argument);
}

TEST(AdaptiveUpdate, PresentKeysRefreshedNotMoved) {
  auto t = abcde();
  std::vector<KeyCount> trained = {{K(4), 50}, {K(1), 1}};
  auto before = t.order();
  auto s = t.adaptive_update(trained);
  EXPECT_EQ(t.order(), before);
  EXPECT_EQ(t.count(K(4)), 50u);  // cold: refreshed
  EXPECT_EQ(t.count(K(1)), 10u);  // hot: kept
  EXPECT_EQ(s.keys_refreshed, 1u);
}

TEST(FrequencyTable, LookupErrors) {
  auto t = abcde();
  t.assign(K(1), 77);
  EXPECT_EQ(t.lookup(K(1)), 77u);
  EXPECT_THROW(t.lookup(K(2)), std::logic_error);  // no address yet
  try {
    t.lookup(K(99));
    FAIL();
  } catch (const MissingKeyError& e) {
    EXPECT_EQ(e.reason(), MissingKeyReason::NeverTrained);
  }
  t.evict(K(4));
  try {
    t.lookup(K(4));
    FAIL();
  } catch (const MissingKeyError& e) {
    EXPECT_EQ(e.reason(), MissingKeyReason::Evicted);
  }
  EXPECT_FALSE(t.find(K(4)));
  t.audit();
}

TEST(FrequencyTable, SaveLoadRoundTrip) {
  auto t = abcde();
  t.assign(K(1), 5);
  t.assign(K(3), 9);
  std::vector<KeyCount> trained = {{K(50), 9}, {K(51), 1}};
  t.adaptive_update(trained);
  t.evict(K(5));
  std::stringstream ss;
  t.save(ss);
  auto u = FrequencyTable::load(ss);
  EXPECT_EQ(u.order(), t.order());
  EXPECT_EQ(u.threshold(), t.threshold());
  EXPECT_EQ(u.find(K(3)), t.find(K(3)));
  EXPECT_EQ(u.count(K(50)), 9u);
  EXPECT_THROW(u.lookup(K(5)), MissingKeyError);
  u.audit();
  std::stringstream bad("garbage");
  EXPECT_THROW(FrequencyTable::load(bad), std::runtime_error);
}

// Literal replay of the list update on random instances: order, threshold and
// the set of keys needing an address all match.
TEST(AdaptiveUpdate, MatchesLiteralReplay) {
  std::mt19937_64 rng(2024);
  for (int it = 0; it < 2000; ++it) {
    const auto n = 1 + rng() % 300;
    const auto x = 1 + rng() % 1000;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> kc;
    std::set<std::uint64_t> used;
    while (kc.size() < n) {
      auto r = rng() % 5000;
      if (used.insert(r).second) kc.push_back({r, rng() % 50});
    }
    std::vector<std::pair<std::uint64_t, std::uint64_t>> trained;
    const auto m = rng() % 40;
    while (trained.size() < m) {
      auto r = rng() % 5000;
      if (rng() % 5 == 0 && !kc.empty()) r = kc[rng() % kc.size()].first;  // some already present
      bool dup = false;
      for (auto& p : trained) dup |= p.first == r;
      if (!dup) trained.push_back({r, rng() % 60});
    }
    auto ref = oracle::ListReplay::build(kc, x);
    auto fresh = ref.update(trained);

    std::vector<KeyCount> kcs, tr;
    for (auto [k, c] : kc) kcs.push_back({K(std::uint32_t(k)), c});
    for (auto [k, c] : trained) tr.push_back({K(std::uint32_t(k)), c});
    auto t = FrequencyTable::build_from_counts(kSpace, kcs, double(x) / 1000.0);
    auto s = t.adaptive_update(tr);
    t.audit();

    auto got = rows(t.order());
    ASSERT_EQ(got.size(), ref.list.size());
    for (std::size_t i = 0; i < got.size(); ++i) ASSERT_EQ(got[i], ref.list[i]) << "instance " << it;
    ASSERT_EQ(t.threshold()->row, ref.tau);
    std::set<std::uint64_t> changed;
    for (auto k : s.hot_region_keys_for_reassignment) changed.insert(k.row);
    for (auto k : s.direct_assignments) changed.insert(k.row);
    ASSERT_EQ(changed, ref.changed(fresh)) << "instance " << it;
  }
}

TEST(AdaptiveUpdate, HotRegionStaysNonIncreasing) {
  std::mt19937_64 rng(8);
  std::vector<KeyCount> kc;
  for (std::uint32_t r = 0; r < 400; ++r) kc.push_back({K(r), rng() % 100});
  auto t = FrequencyTable::build_from_counts(kSpace, kc, 0.2);
  for (int round = 0; round < 20; ++round) {
    std::vector<KeyCount> tr;
    for (int j = 0; j < 30; ++j) tr.push_back({K(1000 + round * 30 + j), rng() % 150});
    t.adaptive_update(tr);
    t.audit();
    std::uint64_t last = ~0ull;
    for (auto k : t.hot_region()) {
      ASSERT_LE(t.count(k), last);
      last = t.count(k);
    }
  }
}

// Entries strictly inside the cold tail keep their links unless they are the
// demoted thresholds or the appended keys.
TEST(AdaptiveUpdate, ColdLinksUntouched) {
  std::mt19937_64 rng(3);
  for (int it = 0; it < 200; ++it) {
    std::vector<KeyCount> kc;
    for (std::uint32_t r = 0; r < 200; ++r) kc.push_back({K(r), rng() % 40});
    auto t = FrequencyTable::build_from_counts(kSpace, kc, 0.1);
    auto before_order = t.order();
    std::map<std::uint32_t, std::pair<std::optional<VectorKey>, std::optional<VectorKey>>> links;
    for (auto k : before_order) links[k.row] = {t.prev(k), t.next(k)};
    const auto old_tail = *t.tail();
    std::vector<KeyCount> tr;
    for (int j = 0; j < 10; ++j) tr.push_back({K(500 + j), rng() % 60});
    auto s = t.adaptive_update(tr);

    std::set<std::uint32_t> hot_before;
    for (std::size_t i = 0; i < threshold_rank(200, 0.1); ++i) hot_before.insert(before_order[i].row);
    for (auto k : before_order) {
      if (hot_before.count(k.row)) continue;
      auto [p, n] = links[k.row];
      // the first cold entry may get a new prev, the old tail a new next
      if (k.row != before_order[hot_before.size()].row) EXPECT_EQ(t.prev(k), p);
      if (k != old_tail) EXPECT_EQ(t.next(k), n);
    }
    (void)s;
  }
}
