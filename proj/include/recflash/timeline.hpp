#pragma once

#include <cstdint>
#include <vector>

#include "recflash/engine.hpp"
#include "recflash/flash_model.hpp"
#include "recflash/remap.hpp"
#include "recflash/workload.hpp"

namespace recflash {

struct TimelineSpec {
  TraceSpec trace;  // days and num_queries are derived from the fields below
  FlashConfig flash;
  TriggerPolicy trigger;
  std::uint32_t days = 35;
  // Queries actually simulated per day; day totals are extrapolated from
  // their mean latencies.
  std::uint64_t sim_queries_per_day = 1000;
  std::vector<std::uint64_t> daily_inferences = {200'000, 1'000'000, 5'000'000, 20'000'000};
  double hot_fraction = 0.10;  // table threshold for periodic triggers
  std::uint64_t layout_seed = 7;
  std::uint64_t page_cache_bytes = PageCache::kDefaultCapacityBytes;
  bool charge_remap_cost = true;
};

struct DayRecord {
  std::uint32_t day = 0;
  double baseline_us = 0.0;  // mean embedding latency per query
  double recflash_us = 0.0;
  double degraded_us = 0.0;  // mean while the remap is in flight (0 if none)
  double baseline_energy_uj = 0.0;  // per query
  double recflash_energy_uj = 0.0;
  bool remap_in_flight = false;  // this day starts with a remap window
  double remap_overhead_us = 0.0;
  bool triggered = false;  // training ran at the end of this day
};

struct TimelineCurve {
  std::uint64_t daily_inferences = 0;
  std::vector<double> baseline_cumulative_us;  // after each day
  std::vector<double> recflash_cumulative_us;
  std::vector<double> remap_overhead_us;       // overhead charged on each day
};

struct TimelineReport {
  std::vector<DayRecord> days;
  std::vector<TimelineCurve> curves;
  SimReport baseline;
  SimReport recflash;  // remap_events lists every triggered training
};

// Day 0 is the offline profile that seeds the table and the AF_PD layout;
// days 1..days are served by the baseline (selective data-out on the
// scattered layout) and by RecFlash with the configured trigger. A
// triggered training at the end of day d is planned at once; day d+1 is
// first served on the old mapping without the page cache, then the plan is
// applied, the cache flushed, and RecFlash resumes.
TimelineReport run_timeline(const TimelineSpec& spec);

}  // namespace recflash
