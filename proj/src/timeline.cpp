#include "recflash/timeline.hpp"

#include <algorithm>
#include <optional>
#include <unordered_map>

namespace recflash {

namespace {

// Pulls one day's queries at a time out of a day-segmented stream.
class DayReader {
 public:
  explicit DayReader(QueryStream& s) : stream_(&s) {}

  bool next_day(std::vector<LookupQuery>& out) {
    out.clear();
    if (done_) return false;
    TraceEvent ev;
    while (stream_->next(ev)) {
      if (ev.kind == TraceEvent::Kind::DayBoundary) {
        if (!started_) {
          started_ = true;  // leading boundary of day 0
          continue;
        }
        return true;
      }
      started_ = true;
      out.push_back(std::move(ev.query));
    }
    done_ = true;
    return true;
  }

 private:
  QueryStream* stream_;
  bool started_ = false;
  bool done_ = false;
};

struct Delta {
  double latency_us;
  double energy_uj;
};

Delta serve_all(Engine& e, const std::vector<LookupQuery>& qs) {
  const auto t0 = e.report().embedding_time;
  const auto e0 = e.report().read_energy_uj;
  for (const auto& q : qs) e.serve_query(q);
  const double n = qs.empty() ? 1.0 : double(qs.size());
  return {(e.report().embedding_time - t0).us() / n, (e.report().read_energy_uj - e0) / n};
}

}  // namespace

TimelineReport run_timeline(const TimelineSpec& spec) {
  TimelineReport rep;
  rep.baseline.policy = "sel";
  rep.recflash.policy = "recflash";
  if (spec.days == 0) return rep;
  spec.trigger.validate();
  if (spec.sim_queries_per_day == 0) throw std::invalid_argument("sim_queries_per_day must be positive");

  TraceSpec ts = spec.trace;
  ts.days = spec.days + 1;
  ts.num_queries = spec.sim_queries_per_day * ts.days;
  TraceGenerator gen(ts);
  DayReader reader(gen);
  const auto& preset = ts.preset;
  const KeySpace space(preset.num_tables, ts.rows_per_table);
  const SlotGeometry geo(spec.flash, preset.vector_bytes());

  std::vector<LookupQuery> day;
  reader.next_day(day);
  std::vector<std::uint32_t> dense(space.size(), 0);
  for (const auto& q : day)
    for (std::size_t i = 0; i < q.size(); ++i) ++dense[space.index(q.key(i))];
  const double hot_fraction =
      spec.trigger.kind == TriggerPolicy::Kind::Threshold ? spec.trigger.hot_fraction : spec.hot_fraction;
  ManagedLayout layout(FrequencyTable::build_from_dense_counts(space, dense, hot_fraction), geo, LayoutKind::AF_PD);
  dense = {};
  const BaselineMapping base(geo, space, spec.layout_seed);

  EngineOptions sel_opts;
  sel_opts.policy = PolicyKind::SelDataOut;
  EngineOptions rf_opts;
  rf_opts.policy = PolicyKind::RecFlash;
  rf_opts.page_cache_bytes = spec.page_cache_bytes;
  Engine base_engine(spec.flash, base, sel_opts);
  Engine rf_engine(spec.flash, layout, rf_opts);
  Engine degraded_engine(spec.flash, layout, sel_opts);

  std::unordered_map<VectorKey, std::uint64_t> window;
  std::optional<RemapPlan> pending;
  double pending_overhead = 0.0;

  for (std::uint32_t d = 1; d <= spec.days; ++d) {
    if (!reader.next_day(day)) throw std::logic_error("stream ended before day " + std::to_string(d));
    DayRecord rec;
    rec.day = d;
    auto b = serve_all(base_engine, day);
    rec.baseline_us = b.latency_us;
    rec.baseline_energy_uj = b.energy_uj;
    if (pending) {
      rec.degraded_us = serve_all(degraded_engine, day).latency_us;
      layout.apply(*pending);
      pending.reset();
      rf_engine.flush_cache();
      rec.remap_in_flight = true;
      rec.remap_overhead_us = pending_overhead;
    }
    auto r = serve_all(rf_engine, day);
    rec.recflash_us = r.latency_us;
    rec.recflash_energy_uj = r.energy_uj;

    for (const auto& q : day)
      for (std::size_t i = 0; i < q.size(); ++i) ++window[q.key(i)];

    if (d < spec.days) {
      std::vector<KeyCount> trained;
      trained.reserve(window.size());
      for (auto [k, c] : window) trained.push_back({k, c});
      std::sort(trained.begin(), trained.end(), [](const KeyCount& a, const KeyCount& b) {
        return a.count != b.count ? a.count > b.count : a.key < b.key;
      });
      if (check_trigger(trained, layout.table(), spec.trigger, d)) {
        auto summary = layout.table().adaptive_update(trained);
        auto plan = layout.plan_reassignment(summary);
        RemapEvent ev;
        ev.day = d;
        ev.pages_moved = plan.pages_moved;
        ev.blocks_erased = plan.blocks_erased;
        ev.keys_moved = plan.deltas.size();
        if (spec.charge_remap_cost) {
          const auto c = plan.cost(spec.flash);
          ev.latency_us = c.latency_us;
          ev.energy_uj = c.energy_uj;
          ev.update_logic_us = double(summary.comparisons + summary.pointer_writes) * kUpdateLogicStepUs;
        }
        rf_engine.report().remap_events.push_back(ev);
        pending_overhead = ev.overhead_us();
        pending = std::move(plan);
        window.clear();
        rec.triggered = true;
      }
    }
    rep.days.push_back(rec);
  }

  for (auto n : spec.daily_inferences) {
    TimelineCurve c;
    c.daily_inferences = n;
    double base_total = 0, rf_total = 0;
    const double nd = double(n);
    for (const auto& rec : rep.days) {
      base_total += nd * rec.baseline_us;
      double today = nd * rec.recflash_us;
      double overhead = 0;
      if (rec.remap_in_flight) {
        overhead = rec.remap_overhead_us;
        // Queries that arrive while the remap runs see the old mapping.
        const double k = rec.degraded_us > 0 ? std::min(nd, overhead / rec.degraded_us) : 0.0;
        today = k * rec.degraded_us + (nd - k) * rec.recflash_us + overhead;
      }
      rf_total += today;
      c.baseline_cumulative_us.push_back(base_total);
      c.recflash_cumulative_us.push_back(rf_total);
      c.remap_overhead_us.push_back(overhead);
    }
    rep.curves.push_back(std::move(c));
  }

  rep.baseline = base_engine.report();
  rep.recflash = rf_engine.report();
  rep.baseline.cumulative_days = rep.recflash.cumulative_days = spec.days;
  return rep;
}

}  // namespace recflash
