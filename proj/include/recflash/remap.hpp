#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "recflash/flash_model.hpp"
#include "recflash/layout.hpp"
#include "recflash/mapping_table.hpp"

namespace recflash {

struct AddressDelta {
  VectorKey key;
  SlotId old_slot = kNoSlot;
  SlotId new_slot = kNoSlot;
  bool hot = false;  // false: direct assignment into cold space

  bool operator==(const AddressDelta&) const = default;
};

struct RemapPlan {
  std::uint64_t pages_moved = 0;   // hot-region pages written to fresh blocks
  std::uint64_t blocks_erased = 0; // old blocks left fully invalid
  std::uint64_t direct_pages = 0;  // cold pages opened for direct assignments
  std::vector<AddressDelta> deltas;
  std::vector<std::uint64_t> erase_blocks;

  RemapCost cost(const FlashConfig& config) const { return remap_cost(config, pages_moved, blocks_erased); }
};

// Device state for the frequency-managed layouts (AF, AF_PD).
//
// At construction the table's entries are laid out in list order along the
// chosen placement stream. Keys that are not in the table live in a "home"
// region: a dense copy of the whole key space starting at the first block
// boundary after the managed entries, in the same stream order. Home blocks
// are never erased.
//
// Remapping goes through plan_reassignment (allocates fresh pages, computes
// deltas and erasures without touching the table) and apply (commits). Until
// apply, resolve() keeps answering with the old mapping, which is what the
// deploy-then-swap window serves.
class ManagedLayout final : public AddressResolver {
 public:
  ManagedLayout(FrequencyTable table, const SlotGeometry& geo, LayoutKind kind);

  SlotId resolve(const VectorKey& key) const override {
    if (auto s = table_.find(key)) return *s;
    return home_slot(key);
  }
  void resolve_all(const LookupQuery& query, std::vector<SlotId>& out) const override;
  std::optional<VectorKey> stored_key(SlotId slot) const override;
  const SlotGeometry& geometry() const override { return geo_; }

  FrequencyTable& table() { return table_; }
  const FrequencyTable& table() const { return table_; }
  LayoutKind kind() const { return kind_; }
  SlotId home_slot(const VectorKey& key) const;
  std::uint64_t home_first_page() const { return home_page_; }
  bool is_pinned_block(std::uint64_t block) const { return pinned_[block] != 0; }
  std::uint32_t valid_in_block(std::uint64_t block) const { return valid_[block]; }
  const FreePagePool& pool() const { return pool_; }

  // Throws CapacityError (required vs available pages) before mutating
  // anything when the free pool cannot hold the plan, and std::logic_error
  // if the previous plan was never applied.
  RemapPlan plan_reassignment(const UpdateSummary& summary);
  void apply(const RemapPlan& plan);
  RemapPlan reassign_addresses(const UpdateSummary& summary) {
    auto p = plan_reassignment(summary);
    apply(p);
    return p;
  }

 private:
  std::uint64_t block_of_slot(SlotId s) const { return geo_.block_of_page(geo_.page_of(s)); }
  SlotId take_cold_slot();

  FrequencyTable table_;
  SlotGeometry geo_;
  LayoutKind kind_;
  FreePagePool pool_;
  std::uint64_t managed_entries_ = 0;  // entries placed at construction
  std::uint64_t home_page_ = 0;        // first stream page of the home region
  std::vector<std::uint32_t> initial_;  // dense index of the i-th initial slot
  std::unordered_map<SlotId, std::uint32_t> written_;  // slots written after construction
  std::vector<std::uint32_t> valid_;
  std::vector<std::uint8_t> pinned_;
  std::optional<std::uint64_t> cold_page_;
  std::uint32_t cold_used_ = 0;
  std::uint64_t cold_rotor_ = 0;
  bool pending_ = false;
};

}  // namespace recflash
