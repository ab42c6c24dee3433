#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "recflash/keys.hpp"

namespace recflash {

enum class MissingKeyReason { NeverTrained, Evicted };

class MissingKeyError : public std::out_of_range {
 public:
  MissingKeyError(const VectorKey& key, MissingKeyReason reason);
  const VectorKey& key() const { return key_; }
  MissingKeyReason reason() const { return reason_; }

 private:
  VectorKey key_;
  MissingKeyReason reason_;
};

// Result of one adaptive update: what the layout has to (re)place.
struct UpdateSummary {
  std::uint64_t keys_inserted_hot = 0;   // insertions that displaced a threshold key
  std::uint64_t keys_appended_tail = 0;  // new keys that found no insertion point
  std::uint64_t keys_refreshed = 0;      // already-present keys whose count was replaced
  std::uint64_t comparisons = 0;         // comparator evaluations
  std::uint64_t pointer_writes = 0;      // prev/next fields rewritten
  // Every key in [head, threshold] after the update, in list order.
  std::vector<VectorKey> hot_region_keys_for_reassignment;
  // New keys that ended up outside the hot region; they get cold addresses.
  std::vector<VectorKey> direct_assignments;

  bool empty() const { return hot_region_keys_for_reassignment.empty() && direct_assignments.empty(); }
};

// Rank of the threshold key for a table of n entries: ceil(hot_fraction * n),
// clamped to [1, n].
std::uint64_t threshold_rank(std::uint64_t n, double hot_fraction);

// FTL mapping table: a hash table keyed by vector id whose entries are also
// threaded into a doubly linked list in access-frequency order. Storage is
// dense over the key space so that lookups are a single indexed load.
//
// The hot region is [head, threshold]. It is sorted at build time and kept
// non-increasing by adaptive_update; entries after the threshold are in
// arbitrary order (demoted thresholds, appended keys).
class FrequencyTable {
 public:
  FrequencyTable() = default;

  // Orders by count descending, ties by (table, row) ascending. Throws on an
  // empty input, duplicate keys, or keys outside the key space.
  static FrequencyTable build_from_counts(KeySpace space, std::span<const KeyCount> counts, double hot_fraction);
  // Same ordering from a dense per-index count vector; zero-count keys are
  // left out of the table.
  static FrequencyTable build_from_dense_counts(KeySpace space, std::span<const std::uint32_t> counts,
                                                double hot_fraction);

  // Inserts the new keys of a training window and reports which addresses change.
  // Keys already present have their count replaced in place when they sit
  // outside the hot region; hot entries keep their comparison counts.
  UpdateSummary adaptive_update(std::span<const KeyCount> trained);

  // Address of a present key. Throws MissingKeyError if absent and
  // std::logic_error if no address has been assigned yet.
  SlotId lookup(const VectorKey& key) const;
  // Present and assigned, else nullopt. Never throws for in-space keys.
  std::optional<SlotId> find(const VectorKey& key) const {
    if (!space_.contains(key)) return std::nullopt;
    auto i = space_.index(key);
    // Absent and evicted entries always hold kNoSlot.
    if (slot_[i] != kNoSlot) return slot_[i];
    return std::nullopt;
  }
  void prefetch(const VectorKey& key) const {
    if (space_.contains(key)) __builtin_prefetch(&slot_[space_.index(key)]);
  }
  SlotId slot_by_index(std::uint32_t index) const { return (state_[index] & kPresent) ? slot_[index] : kNoSlot; }

  // Profiling-mode access: bumps the stored count (saturating).
  void record_access(const VectorKey& key);
  void assign(const VectorKey& key, SlotId slot);
  // Drops a key from the table; later lookups report Evicted.
  void evict(const VectorKey& key);

  bool contains(const VectorKey& key) const {
    return space_.contains(key) && (state_[space_.index(key)] & kPresent);
  }
  bool in_hot_region(const VectorKey& key) const;
  std::uint64_t count(const VectorKey& key) const;
  std::optional<VectorKey> prev(const VectorKey& key) const;
  std::optional<VectorKey> next(const VectorKey& key) const;

  const KeySpace& space() const { return space_; }
  std::uint64_t size() const { return size_; }
  std::uint64_t hot_size() const { return hot_size_; }
  double hot_fraction() const { return hot_fraction_; }
  std::optional<VectorKey> head() const { return opt_key(head_); }
  std::optional<VectorKey> tail() const { return opt_key(tail_); }
  std::optional<VectorKey> threshold() const { return opt_key(threshold_); }
  std::optional<VectorKey> threshold_prev() const { return opt_key(threshold_ == kNil ? kNil : prev_[threshold_]); }

  std::vector<VectorKey> order() const;
  std::vector<VectorKey> hot_region() const;

  template <typename F>
  void for_each_in_order(F&& f) const {
    for (auto i = head_; i != kNil; i = next_[i]) f(space_.key(i), std::uint64_t{count_[i]}, slot_[i]);
  }

  // Structural audit: list integrity, size bookkeeping, hot-region flags and
  // hot-region ordering. Throws std::logic_error describing the violation.
  void audit() const;

  // Versioned little-endian snapshot (see docs/formats.md).
  void save(std::ostream& out) const;
  static FrequencyTable load(std::istream& in);

 private:
  static constexpr std::uint32_t kNil = 0xffffffffu;
  static constexpr std::uint8_t kPresent = 1;
  static constexpr std::uint8_t kEvicted = 2;
  static constexpr std::uint8_t kHot = 4;

  FrequencyTable(KeySpace space, double hot_fraction);
  void link_in_order(std::span<const std::uint32_t> order);
  void unlink(std::uint32_t i, std::uint64_t& writes);
  void insert_before(std::uint32_t i, std::uint32_t before, std::uint64_t& writes);
  void push_back(std::uint32_t i, std::uint64_t& writes);
  std::uint32_t index_of(const VectorKey& key) const;
  std::optional<VectorKey> opt_key(std::uint32_t i) const {
    return i == kNil ? std::nullopt : std::optional<VectorKey>(space_.key(i));
  }

  KeySpace space_;
  double hot_fraction_ = 1.0;
  std::vector<std::uint32_t> count_;
  std::vector<std::uint32_t> prev_;
  std::vector<std::uint32_t> next_;
  std::vector<SlotId> slot_;
  std::vector<std::uint8_t> state_;
  std::uint32_t head_ = kNil;
  std::uint32_t tail_ = kNil;
  std::uint32_t threshold_ = kNil;
  std::uint64_t size_ = 0;
  std::uint64_t hot_size_ = 0;
};

}  // namespace recflash
