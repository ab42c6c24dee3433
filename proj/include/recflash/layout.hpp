#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "recflash/flash_model.hpp"
#include "recflash/keys.hpp"

namespace recflash {

enum class LayoutKind { Baseline, AF, AF_PD };

std::string_view to_string(LayoutKind k);
LayoutKind parse_layout_kind(std::string_view name);

struct LayoutPolicy {
  LayoutKind kind = LayoutKind::AF_PD;
  std::uint32_t vector_bytes = 128;
  std::uint32_t vectors_per_page = 128;

  static LayoutPolicy make(LayoutKind kind, const FlashConfig& config, std::uint32_t vector_bytes);
};

class CapacityError : public std::runtime_error {
 public:
  CapacityError(const std::string& what, std::uint64_t required, std::uint64_t available)
      : std::runtime_error(what + ": required " + std::to_string(required) + ", available " +
                           std::to_string(available)),
        required_(required),
        available_(available) {}
  std::uint64_t required() const { return required_; }
  std::uint64_t available() const { return available_; }

 private:
  std::uint64_t required_;
  std::uint64_t available_;
};

// Vector-slot view of the device for one vector size.
//
// Pages are numbered plane-major: page_id = plane * pages_per_plane +
// block * pages_per_block + page, where plane is the device-wide plane index
// ((channel * chips + chip) * dies + die) * planes_per_die + plane. A slot is
// page_id * vectors_per_page + position-in-page.
//
// The last reserved_blocks() blocks of every plane form the free pool; the
// placement streams below only cover the remaining "usable" blocks.
class SlotGeometry {
 public:
  SlotGeometry(const FlashConfig& config, std::uint32_t vector_bytes);

  const FlashConfig& config() const { return config_; }
  std::uint32_t vector_bytes() const { return vector_bytes_; }
  std::uint32_t vectors_per_page() const { return vpp_; }
  std::uint64_t planes() const { return planes_; }
  std::uint32_t pages_per_block() const { return config_.pages_per_block; }
  std::uint64_t pages_per_plane() const { return pages_per_plane_; }
  std::uint32_t reserved_blocks() const { return reserved_blocks_; }
  std::uint32_t usable_blocks() const { return config_.blocks_per_plane - reserved_blocks_; }
  std::uint64_t usable_pages_per_plane() const { return std::uint64_t{usable_blocks()} * config_.pages_per_block; }
  std::uint64_t usable_pages() const { return usable_pages_per_plane() * planes_; }
  std::uint64_t usable_slots() const { return usable_pages() * vpp_; }
  std::uint64_t total_blocks() const { return planes_ * config_.blocks_per_plane; }

  std::uint64_t page_id(std::uint64_t plane, std::uint32_t block, std::uint32_t page) const {
    return plane * pages_per_plane_ + std::uint64_t{block} * config_.pages_per_block + page;
  }
  std::uint64_t page_of(SlotId s) const { return s / vpp_; }
  std::uint64_t plane_of_page(std::uint64_t page_id) const { return page_id / pages_per_plane_; }
  // Device-wide block index (plane * blocks_per_plane + block).
  std::uint64_t block_of_page(std::uint64_t page_id) const { return page_id / config_.pages_per_block; }
  std::uint64_t plane_of_block(std::uint64_t block) const { return block / config_.blocks_per_plane; }
  std::uint64_t die_of_plane(std::uint64_t plane) const { return plane / config_.planes_per_die; }
  std::uint32_t plane_in_die(std::uint64_t plane) const {
    return static_cast<std::uint32_t>(plane % config_.planes_per_die);
  }
  std::uint64_t channel_of_plane(std::uint64_t plane) const {
    return plane / (std::uint64_t{config_.planes_per_die} * config_.dies_per_chip * config_.chips_per_channel);
  }
  std::uint32_t offset_of(SlotId s) const { return static_cast<std::uint32_t>(s % vpp_) * vector_bytes_; }

  PhysicalAddress address(SlotId s) const;
  SlotId slot(const PhysicalAddress& a) const;

  // Placement streams over the usable region. AF runs plane by plane; AF_PD
  // deals consecutive pages round-robin across planes.
  std::uint64_t stream_page(LayoutKind kind, std::uint64_t stream_index) const;
  std::uint64_t stream_index_of_page(LayoutKind kind, std::uint64_t page_id) const;
  SlotId stream_slot(LayoutKind kind, std::uint64_t i) const {
    return stream_page(kind, i / vpp_) * vpp_ + i % vpp_;
  }

 private:
  FlashConfig config_;
  std::uint32_t vector_bytes_;
  std::uint32_t vpp_;
  std::uint64_t planes_;
  std::uint64_t pages_per_plane_;
  std::uint32_t reserved_blocks_;
};

// Seeded bijection on [0, n): a Feistel network with cycle walking. Gives a
// uniform-looking scatter without materialising the permutation.
class SeededPermutation {
 public:
  SeededPermutation(std::uint64_t n, std::uint64_t seed);
  std::uint64_t size() const { return n_; }
  std::uint64_t operator()(std::uint64_t x) const;
  std::uint64_t inverse(std::uint64_t y) const;

 private:
  std::uint64_t encrypt(std::uint64_t x) const;
  std::uint64_t decrypt(std::uint64_t y) const;

  static constexpr int kRounds = 6;
  std::uint64_t n_;
  unsigned half_bits_;
  std::uint64_t half_mask_;
  std::uint64_t keys_[kRounds];
};

std::uint64_t splitmix64(std::uint64_t x);

// --- Placement policies (assignment is parallel to the key list) ----------

std::vector<SlotId> place_baseline(std::span<const VectorKey> keys, const SlotGeometry& geo, std::uint64_t seed);
std::vector<SlotId> place_af(std::span<const VectorKey> sorted_keys, const SlotGeometry& geo);
std::vector<SlotId> place_af_pd(std::span<const VectorKey> sorted_keys, const SlotGeometry& geo);

// Audit dump: table,row,channel,chip,die,plane,block,page,offset
void write_assignment_csv(std::ostream& out, std::span<const VectorKey> keys, std::span<const SlotId> slots,
                          const SlotGeometry& geo);

// Maps keys to device slots for the engine, and slots back to whatever key
// is stored there (used to recompute SLS from "read" data).
struct LookupQuery;

class AddressResolver {
 public:
  virtual ~AddressResolver() = default;
  virtual SlotId resolve(const VectorKey& key) const = 0;
  // Resolves every key of a query; `out` is resized to match.
  virtual void resolve_all(const LookupQuery& query, std::vector<SlotId>& out) const;
  virtual std::optional<VectorKey> stored_key(SlotId slot) const = 0;
  virtual const SlotGeometry& geometry() const = 0;
};

// Every key of the key space scattered by a seeded permutation of the usable
// slots (the i-th key in dense order gets place_baseline's i-th slot).
class BaselineMapping final : public AddressResolver {
 public:
  BaselineMapping(const SlotGeometry& geo, KeySpace space, std::uint64_t seed);
  SlotId resolve(const VectorKey& key) const override;
  std::optional<VectorKey> stored_key(SlotId slot) const override;
  const SlotGeometry& geometry() const override { return geo_; }
  std::uint64_t seed() const { return seed_; }

 private:
  SlotGeometry geo_;
  KeySpace space_;
  std::uint64_t seed_;
  SeededPermutation perm_;
};

// Free blocks (initially the reserved tail of every plane) and two write
// fronts: one for remapped hot pages, one for directly assigned cold slots.
class FreePagePool {
 public:
  enum class Front { Hot, Cold };

  explicit FreePagePool(const SlotGeometry& geo);

  std::uint64_t free_blocks() const;
  std::uint64_t free_blocks_on_plane(std::uint64_t plane) const { return free_[plane].size(); }
  // Pages obtainable on a plane from the given front without closing it.
  std::uint64_t available_pages_on_plane(Front f, std::uint64_t plane) const;
  std::uint64_t available_pages(Front f) const;

  // Closes the open blocks of a front; returns the blocks closed.
  std::vector<std::uint64_t> close_front(Front f);
  // Next page on `plane`, opening a free block when needed. Throws
  // CapacityError when the plane has no free block left.
  std::uint64_t take_page(Front f, std::uint64_t plane);
  bool is_open(std::uint64_t block) const;
  void release_block(std::uint64_t block);

 private:
  struct Open {
    std::optional<std::uint64_t> block;
    std::uint32_t next_page = 0;
  };
  std::uint32_t ppb_;
  std::uint32_t bpp_;
  std::vector<std::deque<std::uint64_t>> free_;
  std::vector<Open> hot_;
  std::vector<Open> cold_;
};

}  // namespace recflash
