#include <gtest/gtest.h>

#include <map>
#include <random>
#include <cstring>
#include <set>

#include "../oracles/oracles.hpp"
#include "helpers.hpp"
#include "recflash/engine.hpp"
#include "recflash/remap.hpp"

using namespace recflash;

namespace {

LookupQuery random_query(std::mt19937_64& rng, std::uint32_t tables, std::uint32_t lookups, std::uint32_t rows) {
  LookupQuery q{tables, lookups, {}};
  for (std::uint32_t i = 0; i < tables * lookups; ++i) q.rows.push_back(static_cast<std::uint32_t>(rng() % rows));
  return q;
}

std::map<std::uint64_t, std::set<std::uint32_t>> pages_of(const LookupQuery& q, const AddressResolver& l) {
  std::map<std::uint64_t, std::set<std::uint32_t>> out;
  const auto& g = l.geometry();
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto s = l.resolve(q.key(i));
    out[g.page_of(s)].insert(g.offset_of(s));
  }
  return out;
}

oracle::ClosedFormTiming closed_form(const FlashConfig& c) {
  const auto& t = c.timing;
  return {t.t_alh, t.t_als, t.t_ds, t.t_wc, t.t_r, t.t_rr, t.t_rc};
}

// Fixed slots for hand-built queries.
class FixedLayout final : public AddressResolver {
 public:
  FixedLayout(const SlotGeometry& g, std::map<VectorKey, SlotId> m) : g_(g), m_(std::move(m)) {}
  SlotId resolve(const VectorKey& k) const override { return m_.at(k); }
  std::optional<VectorKey> stored_key(SlotId s) const override {
    for (auto& [k, v] : m_)
      if (v == s) return k;
    return std::nullopt;
  }
  const SlotGeometry& geometry() const override { return g_; }

 private:
  SlotGeometry g_;
  std::map<VectorKey, SlotId> m_;
};

}  // namespace

TEST(Engine, GoldenReadsSinglePlane) {
  auto c = testcfg::tiny(1, 1, 1, 16, 4, 1024);
  SlotGeometry g(c, 128);
  FixedLayout l(g, {{{0, 0}, 0}, {{0, 1}, 1}, {{0, 2}, 8}, {{0, 3}, 9}});
  Engine e(c, l, {PolicyKind::SelDataOut});
  // two pages, one vector each
  auto cost = e.serve_query({1, 2, {0, 2}});
  EXPECT_EQ(cost.latency, Picoseconds::from_us(55.39));
  EXPECT_EQ(cost.page_reads, 2u);
  Engine one(c, l, {PolicyKind::SelDataOut});
  EXPECT_EQ(one.serve_query({1, 2, {0, 1}}).latency, Picoseconds::from_us(30.275));
}

TEST(Engine, MultiPlaneBatchSharesArrayRead) {
  auto c = testcfg::tiny(2, 1, 1, 16, 4, 1024);
  SlotGeometry g(c, 128);
  const auto other_plane = g.pages_per_plane() * g.vectors_per_page();
  FixedLayout l(g, {{{0, 0}, 0}, {{0, 1}, other_plane}});
  Engine e(c, l, {PolicyKind::SelDataOut});
  const TimingTicks t(c.timing);
  EXPECT_EQ(e.serve_query({1, 2, {0, 1}}).latency, t.command_address() * 2 + t.r + t.data_out(128) * 2);
}

TEST(Engine, DuplicateKeysReadOnce) {
  auto c = testcfg::tiny(1);
  SlotGeometry g(c, 128);
  FixedLayout l(g, {{{0, 0}, 3}});
  Engine e(c, l, {PolicyKind::SeqDataOut});
  const TimingTicks t(c.timing);
  auto cost = e.serve_query({1, 3, {0, 0, 0}});
  EXPECT_EQ(cost.latency, t.command_address() + t.r + t.data_out(4 * 128));
  EXPECT_EQ(cost.bytes_useful, 128u);
  EXPECT_EQ(cost.bytes_transferred, 4u * 128);
}

class ClosedForm : public ::testing::TestWithParam<PolicyKind> {};

TEST_P(ClosedForm, SinglePlaneMatchesRecomputation) {
  auto c = testcfg::tiny(1, 1, 1, 128, 4, 1024);
  SlotGeometry g(c, 128);
  KeySpace space(4, 500);
  BaselineMapping l(g, space, 11);
  Engine e(c, l, {GetParam()});
  const auto cf = closed_form(c);
  std::mt19937_64 rng(21);
  for (int i = 0; i < 300; ++i) {
    auto q = random_query(rng, 4, 1 + rng() % 12, 500);
    const auto pages = pages_of(q, l);
    const auto want = GetParam() == PolicyKind::SeqDataOut ? cf.sequential(pages, 128) : cf.selective(pages, 128);
    ASSERT_EQ(e.serve_query(q).latency.count(), want) << i;
  }
}

INSTANTIATE_TEST_SUITE_P(Policies, ClosedForm, ::testing::Values(PolicyKind::SeqDataOut, PolicyKind::SelDataOut));

TEST(Engine, SlsIdenticalAcrossLayoutsAndPolicies) {
  auto c = testcfg::tiny(2, 2, 1, 128, 4, 1024);
  SlotGeometry g(c, 128);
  KeySpace space(3, 300);
  std::mt19937_64 rng(5);
  std::vector<KeyCount> kc;
  for (std::uint32_t i = 0; i < space.size(); i += 3) kc.push_back({space.key(i), 1 + rng() % 50});
  BaselineMapping base(g, space, 3);
  ManagedLayout af(FrequencyTable::build_from_counts(space, kc, 0.1), g, LayoutKind::AF);
  ManagedLayout afpd(FrequencyTable::build_from_counts(space, kc, 0.1), g, LayoutKind::AF_PD);
  std::vector<const AddressResolver*> layouts = {&base, &af, &afpd};
  std::vector<Engine> engines;
  for (auto* l : layouts)
    for (auto p : {PolicyKind::SeqDataOut, PolicyKind::SelDataOut, PolicyKind::RecFlash}) {
      EngineOptions o{p};
      engines.emplace_back(c, *l, o);
      o.vector_cache_per_table = 8;
      engines.emplace_back(c, *l, o);
    }
  std::vector<float> ref, got;
  for (int i = 0; i < 100; ++i) {
    auto q = random_query(rng, 3, 10, 300);
    ref.assign(3 * 32, 0.0f);
    for (std::size_t j = 0; j < q.size(); ++j)
      for (std::uint32_t d = 0; d < 32; ++d) ref[q.key(j).table * 32 + d] += payload_value(q.key(j), d);
    for (auto& e : engines) {
      e.serve_query(q, &got);
      ASSERT_EQ(std::memcmp(got.data(), ref.data(), ref.size() * sizeof(float)), 0) << i;
    }
  }
}

TEST(Engine, PageCacheHitsCostOnlyHitLatency) {
  auto c = testcfg::tiny(2);
  SlotGeometry g(c, 128);
  KeySpace space(1, 200);
  BaselineMapping l(g, space, 1);
  EngineOptions o{PolicyKind::RecFlash};
  o.page_cache_bytes = 64 * 1024;
  o.cache_hit_latency_us = 0.5;
  Engine e(c, l, o);
  LookupQuery q{1, 4, {1, 2, 3, 4}};
  auto first = e.serve_query(q);
  EXPECT_EQ(first.cache_hits, 0u);
  EXPECT_GT(first.page_reads, 0u);
  auto second = e.serve_query(q);
  EXPECT_EQ(second.page_reads, 0u);
  EXPECT_EQ(second.cache_hits, first.cache_misses);
  EXPECT_EQ(second.latency, Picoseconds::from_us(0.5) * static_cast<std::int64_t>(second.cache_hits));
  e.flush_cache();
  EXPECT_EQ(e.serve_query(q).latency, first.latency);
  EXPECT_EQ(e.report().queries, 3u);
  EXPECT_EQ(e.report().page_reads, 2 * first.page_reads);
  EXPECT_DOUBLE_EQ(e.report().read_energy_uj, read_energy(c, 2 * first.page_reads));
}

TEST(Engine, SelectiveNeverSlowerThanSequential) {
  auto c = testcfg::tiny(2, 2, 2, 128, 4, 2048);
  SlotGeometry g(c, 128);
  KeySpace space(2, 1000);
  BaselineMapping l(g, space, 4);
  Engine seq(c, l, {PolicyKind::SeqDataOut}), sel(c, l, {PolicyKind::SelDataOut});
  std::mt19937_64 rng(8);
  for (int i = 0; i < 200; ++i) {
    auto q = random_query(rng, 2, 20, 1000);
    ASSERT_LE(sel.serve_query(q).latency, seq.serve_query(q).latency);
  }
}

TEST(Engine, PipelinedOverlapsAcrossDies) {
  auto c = testcfg::tiny(1, 2, 2, 128, 4, 1024);
  SlotGeometry g(c, 128);
  KeySpace space(2, 500);
  BaselineMapping l(g, space, 6);
  EngineOptions o{PolicyKind::SelDataOut};
  Engine plain(c, l, o);
  o.pipelined = true;
  Engine pipe(c, l, o);
  std::mt19937_64 rng(9);
  for (int i = 0; i < 200; ++i) {
    auto q = random_query(rng, 2, 3, 500);
    plain.serve_query(q);
    pipe.serve_query(q);
  }
  EXPECT_LE(pipe.report().embedding_time, plain.report().embedding_time);
  EXPECT_GT(pipe.report().embedding_time, Picoseconds{});
}

TEST(Engine, EndToEndAddsMlp) {
  auto c = testcfg::tiny(1);
  SlotGeometry g(c, 128);
  KeySpace space(1, 10);
  BaselineMapping l(g, space, 1);
  auto preset = dlrm_preset("rmc1");
  MlpCostModel mlp{100, 200, 300, 0};
  Engine e(c, l, {}, mlp, &preset);
  e.serve_query({1, 1, {3}});
  e.serve_query({1, 1, {4}});
  EXPECT_DOUBLE_EQ(e.report().end_to_end_latency_us, e.report().embedding_latency_us + 200);
  EXPECT_DOUBLE_EQ(end_to_end_latency(10, preset, mlp), 110);
}

TEST(Payload, DeterministicAndKeyed) {
  EXPECT_EQ(payload_value({1, 2}, 3), payload_value({1, 2}, 3));
  EXPECT_NE(payload_value({1, 2}, 3), payload_value({2, 1}, 3));
  for (std::uint32_t e = 0; e < 64; ++e) {
    const float x = payload_value({0, 7}, e);
    EXPECT_GE(x, -0.5f);
    EXPECT_LT(x, 0.5f);
  }
}

TEST(Trigger, ParseAndFormat) {
  EXPECT_EQ(TriggerPolicy::parse("daily").to_string(), "periodic:1");
  EXPECT_EQ(TriggerPolicy::parse("periodic:7").period_days, 7u);
  auto t = TriggerPolicy::parse("threshold:0.2:0.01");
  EXPECT_EQ(t.kind, TriggerPolicy::Kind::Threshold);
  EXPECT_DOUBLE_EQ(t.hot_fraction, 0.2);
  EXPECT_DOUBLE_EQ(t.portion, 0.01);
  EXPECT_EQ(TriggerPolicy::parse(t.to_string()).to_string(), t.to_string());
  for (auto bad : {"weekly", "periodic:0", "periodic:1.5", "threshold:x", "daily:2"})
    EXPECT_THROW(TriggerPolicy::parse(bad), std::invalid_argument) << bad;
}

TEST(Trigger, Check) {
  KeySpace space(1, 100);
  std::vector<KeyCount> kc;
  for (std::uint32_t r = 0; r < 10; ++r) kc.push_back({{0, r}, 100 - r * 10});  // 100, 90, ..., 10
  auto table = FrequencyTable::build_from_counts(space, kc, 0.3);
  const auto f_tau = table.count(*table.threshold());
  TriggerPolicy periodic = TriggerPolicy::parse("periodic:3");
  EXPECT_FALSE(check_trigger({}, table, periodic, 0));
  EXPECT_FALSE(check_trigger({}, table, periodic, 2));
  EXPECT_TRUE(check_trigger({}, table, periodic, 6));
  TriggerPolicy th = TriggerPolicy::parse("threshold:0.3:0.2");
  std::vector<KeyCount> window = {{{0, 50}, f_tau + 1}, {{0, 51}, f_tau}, {{0, 52}, 1}, {{0, 53}, 1}};
  EXPECT_TRUE(check_trigger(window, table, th, 1));  // 1 of 4 > 0.2 * 4
  window.push_back({{0, 54}, 1});
  EXPECT_FALSE(check_trigger(window, table, th, 1));  // 1 of 5 is not above 1.0
  EXPECT_FALSE(check_trigger({}, table, th, 1));
}
