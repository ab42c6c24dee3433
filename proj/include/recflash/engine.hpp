#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "recflash/cache.hpp"
#include "recflash/flash_model.hpp"
#include "recflash/layout.hpp"
#include "recflash/mapping_table.hpp"
#include "recflash/time.hpp"
#include "recflash/workload.hpp"

namespace recflash {

enum class PolicyKind { SeqDataOut, SelDataOut, RecFlash };

std::string_view to_string(PolicyKind p);
PolicyKind parse_policy_kind(std::string_view name);

struct EngineOptions {
  PolicyKind policy = PolicyKind::SelDataOut;
  // Carry plane/channel occupancy across queries instead of starting each
  // query on an idle device.
  bool pipelined = false;
  std::uint64_t page_cache_bytes = PageCache::kDefaultCapacityBytes;  // RecFlash only
  double cache_hit_latency_us = 0.0;
  // Host-side per-table vector cache in front of the device; off by default.
  std::size_t vector_cache_per_table = 0;
};

struct QueryCost {
  Picoseconds latency{};
  std::uint64_t page_reads = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
  std::uint64_t vector_cache_hits = 0;
  std::uint64_t vector_cache_misses = 0;
  std::uint64_t bytes_useful = 0;       // requested vector bytes in pages read from the array
  std::uint64_t bytes_page_buffer = 0;  // page bytes loaded into page buffers
  std::uint64_t bytes_transferred = 0;  // bytes clocked out over the channel
};

struct RemapEvent {
  std::uint32_t day = 0;
  std::uint64_t pages_moved = 0;
  std::uint64_t blocks_erased = 0;
  std::uint64_t keys_moved = 0;
  double latency_us = 0.0;       // program/erase work
  double energy_uj = 0.0;
  double update_logic_us = 0.0;  // comparator and pointer updates

  double overhead_us() const { return latency_us + update_logic_us; }
};

struct SimReport {
  std::string policy;
  std::uint64_t queries = 0;
  Picoseconds embedding_time{};       // exact sum over queries
  double embedding_latency_us = 0.0;  // summed over queries
  double end_to_end_latency_us = 0.0;
  double read_energy_uj = 0.0;
  std::uint64_t page_reads = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
  std::uint64_t vector_cache_hits = 0;
  std::uint64_t vector_cache_misses = 0;
  std::uint64_t bytes_fetched_useful = 0;
  std::uint64_t bytes_fetched_total = 0;
  std::uint64_t bytes_transferred = 0;
  std::uint64_t cache_flushes = 0;
  std::vector<RemapEvent> remap_events;
  std::uint32_t cumulative_days = 0;

  double mean_embedding_latency_us() const { return queries ? embedding_latency_us / double(queries) : 0.0; }
  double page_utilization() const {
    return bytes_fetched_total ? double(bytes_fetched_useful) / double(bytes_fetched_total) : 0.0;
  }
  void merge(const SimReport& o);
};

// Fixed MLP time per inference, per model preset.
struct MlpCostModel {
  double rmc1_us = 0.0;
  double rmc2_us = 0.0;
  double rmc3_us = 0.0;
  double other_us = 0.0;

  static MlpCostModel defaults();
  double cost_us(const DlrmPreset& preset) const;
};

double end_to_end_latency(double embedding_us, const DlrmPreset& preset, const MlpCostModel& mlp);

// Deterministic synthetic embedding row for a stored key.
float payload_value(const VectorKey& key, std::uint32_t element);

// Replays queries against one layout, policy and cache configuration.
//
// Per query the keys are resolved to slots and grouped by physical page in
// first-touch order. Pages that miss every cache are read from flash. Each
// die serves its pages in multi-plane batches (the b-th page queued on every
// plane of the die): the batch's C/A cycles are issued back to back on the
// channel, the array reads overlap across planes, then the data-out of every
// page in the batch is clocked over the channel. The next batch on a die
// starts after the previous data-out. Channels serve requests first come,
// first served; dies on the same channel overlap their array reads.
class Engine {
 public:
  Engine(const FlashConfig& config, const AddressResolver& layout, EngineOptions options, const MlpCostModel& mlp = {},
         const DlrmPreset* preset = nullptr);

  // `sls`, when non-null, receives tables * dim sums (summed in lookup order).
  QueryCost serve_query(const LookupQuery& query, std::vector<float>* sls = nullptr);
  // Serves every query of a stream; day boundaries only advance the day count.
  void serve_stream(QueryStream& stream);

  void set_layout(const AddressResolver& layout) { layout_ = &layout; }
  void flush_cache();
  const SimReport& report() const { return report_; }
  SimReport& report() { return report_; }
  const EngineOptions& options() const { return options_; }
  const PageCache* page_cache() const { return page_cache_ ? &*page_cache_ : nullptr; }

 private:
  struct PageWork {
    std::uint64_t page;
    std::uint32_t vectors = 0;
    std::uint32_t last_offset = 0;
    bool miss = true;
    std::uint32_t first_touch = 0;
  };
  // Open-addressing uint64 -> uint32 map cleared in O(1) by bumping a stamp.
  class ScratchIndex {
   public:
    void reset(std::size_t expected);
    // Returns the stored value and whether the key was new (then `value` is stored).
    std::pair<std::uint32_t, bool> insert(std::uint64_t key, std::uint32_t value);

   private:
    std::vector<std::uint64_t> keys_;
    std::vector<std::uint32_t> values_;
    std::vector<std::uint32_t> stamps_;
    std::uint32_t stamp_ = 0;
    std::size_t mask_ = 0;
  };
  Picoseconds schedule();

  FlashConfig config_;
  TimingTicks ticks_;
  const AddressResolver* layout_;
  EngineOptions options_;
  MlpCostModel mlp_;
  std::optional<DlrmPreset> preset_;
  std::optional<PageCache> page_cache_;
  std::optional<VectorCache> vector_cache_;
  SimReport report_;

  // Scratch reused across queries.
  std::vector<PageWork> pages_;
  std::vector<SlotId> slots_;
  ScratchIndex seen_slots_;
  ScratchIndex page_index_;
  // Pipelined mode state.
  std::vector<Picoseconds> die_ready_;
  std::vector<Picoseconds> channel_free_;
  Picoseconds last_finish_{};
};

struct TriggerPolicy {
  enum class Kind { Threshold, Periodic };
  Kind kind = Kind::Periodic;
  double hot_fraction = 0.10;
  double portion = 0.001;
  std::uint32_t period_days = 1;

  static TriggerPolicy parse(std::string_view text);  // "periodic:1", "threshold:0.1:0.001", "daily"
  std::string to_string() const;
  void validate() const;
};

// Threshold: more than portion * |window| keys of the window counted above
// the reference table's threshold count. Periodic: `day` (1-based count of
// completed days) is a multiple of the period.
bool check_trigger(std::span<const KeyCount> window, const FrequencyTable& reference, const TriggerPolicy& policy,
                   std::uint32_t day);

// Time charged per comparator evaluation or pointer write of the update logic.
inline constexpr double kUpdateLogicStepUs = 0.002;

}  // namespace recflash
