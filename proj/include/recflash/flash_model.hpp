#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>

#include "recflash/time.hpp"

namespace recflash {

// NAND read-interface timing, all values in microseconds.
struct TimingParams {
  double t_alh = 0.005;  // ALE hold
  double t_als = 0.01;   // ALE setup
  double t_ds = 0.007;   // data setup
  double t_wc = 0.02;    // write cycle
  double t_r = 25.0;     // array -> page buffer
  double t_rr = 0.02;    // ready to RE# falling edge
  double t_rc = 0.02;    // read cycle (one byte per cycle)

  // Throws std::invalid_argument if a field is non-positive or the C/A
  // stage would come out negative.
  void validate() const;

  bool operator==(const TimingParams&) const = default;
};

enum class CellType { SLC, TLC, QLC };

std::string_view to_string(CellType c);
CellType parse_cell_type(std::string_view name);

struct FlashConfig {
  CellType cell_type = CellType::TLC;
  std::uint32_t page_size = 16384;  // bytes
  std::uint32_t planes_per_die = 2;
  std::uint32_t dies_per_chip = 1;
  std::uint32_t chips_per_channel = 1;
  std::uint32_t channels = 1;
  std::uint32_t blocks_per_plane = 4096;
  std::uint32_t pages_per_block = 256;
  TimingParams timing{};
  double page_read_energy = 69.06;       // uJ per page read
  double page_program_latency = 660.0;   // us
  double block_erase_latency = 3.5;      // ms
  double page_program_energy = 150.0;    // uJ
  double block_erase_energy = 500.0;     // uJ
  double data_out_energy_per_byte = 0.0; // uJ, opt-in adder
  double cache_hit_energy = 0.0;         // uJ per page-cache hit, opt-in adder
  double reserved_block_fraction = 0.05; // tail of each plane kept as free pool

  void validate() const;
  // Additionally checks that vectors of the given size tile a page.
  void validate_for_vector(std::uint32_t vector_bytes) const;

  std::uint64_t total_planes() const {
    return std::uint64_t{channels} * chips_per_channel * dies_per_chip * planes_per_die;
  }
  std::uint64_t total_dies() const { return std::uint64_t{channels} * chips_per_channel * dies_per_chip; }

  bool operator==(const FlashConfig&) const = default;
};

// Named rows of the NAND configuration table: "slc", "tlc", "qlc".
FlashConfig flash_preset(std::string_view name);
FlashConfig flash_preset(CellType cell);

// Canonical key/value serialization. load(save(c)) == c bit-exactly.
std::string serialize_flash_config(const FlashConfig& config);
FlashConfig parse_flash_config(std::string_view text);
FlashConfig load_flash_config(const std::string& path);

struct PhysicalAddress {
  std::uint32_t channel = 0;
  std::uint32_t chip = 0;
  std::uint32_t die = 0;
  std::uint32_t plane = 0;
  std::uint32_t block = 0;
  std::uint32_t page = 0;
  std::uint32_t offset = 0;  // byte offset within the page

  bool operator==(const PhysicalAddress&) const = default;
};

std::ostream& operator<<(std::ostream& os, const PhysicalAddress& a);

// Throws std::out_of_range if any index exceeds the geometry or the vector
// would straddle a page boundary.
void validate_address(const FlashConfig& config, const PhysicalAddress& a, std::uint32_t vector_bytes);

// --- Read timing -----------------------------------------------------------

// (t_alh + t_als - t_ds) + 5 t_wc + t_ds
double command_address_time(const TimingParams& timing);
// t_rr + t_rc * n_bytes
double data_out_time(const TimingParams& timing, std::uint64_t n_bytes);
// C/A + t_r + k data-outs (selective data-out of k vectors from one page).
double single_page_read_time(const TimingParams& timing, std::uint32_t vectors_in_page,
                             std::uint32_t vector_bytes, std::uint32_t page_size);

// Integer-picosecond variants used by the event engine.
struct TimingTicks {
  Picoseconds alh, als, ds, wc, r, rr, rc;

  explicit TimingTicks(const TimingParams& t);
  Picoseconds command_address() const { return (alh + als - ds) + wc * 5 + ds; }
  Picoseconds data_out(std::uint64_t n_bytes) const { return rr + rc * static_cast<std::int64_t>(n_bytes); }
};

// --- Energy and remapping cost ---------------------------------------------

double read_energy(const FlashConfig& config, std::uint64_t page_reads);

struct RemapCost {
  double latency_us = 0.0;
  double energy_uj = 0.0;
};

// pages_moved * (t_r + t_prog) + blocks_erased * t_erase, energy analogous
// (a moved page costs one read and one program).
RemapCost remap_cost(const FlashConfig& config, std::uint64_t pages_moved, std::uint64_t blocks_erased);

}  // namespace recflash
