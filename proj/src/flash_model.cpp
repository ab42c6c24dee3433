#include "recflash/flash_model.hpp"

#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "recflash/kv_config.hpp"

namespace recflash {

void TimingParams::validate() const {
  const std::pair<const char*, double> fields[] = {{"t_alh", t_alh}, {"t_als", t_als}, {"t_ds", t_ds}, {"t_wc", t_wc},
                                                   {"t_r", t_r},     {"t_rr", t_rr},   {"t_rc", t_rc}};
  for (auto [name, v] : fields) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string("timing field ") + name + " must be positive");
  }
  if (!(t_als + t_alh > t_ds)) throw std::invalid_argument("timing requires t_als + t_alh > t_ds");
}

std::string_view to_string(CellType c) {
  switch (c) {
    case CellType::SLC:
      return "slc";
    case CellType::TLC:
      return "tlc";
    case CellType::QLC:
      return "qlc";
  }
  return "?";
}

CellType parse_cell_type(std::string_view name) {
  if (name == "slc" || name == "SLC") return CellType::SLC;
  if (name == "tlc" || name == "TLC") return CellType::TLC;
  if (name == "qlc" || name == "QLC") return CellType::QLC;
  throw std::invalid_argument("unknown NAND type '" + std::string(name) + "' (valid: slc, tlc, qlc)");
}

void FlashConfig::validate() const {
  timing.validate();
  if (page_size == 0) throw std::invalid_argument("page_size must be positive");
  const std::pair<const char*, std::uint32_t> counts[] = {{"planes_per_die", planes_per_die},
                                                          {"dies_per_chip", dies_per_chip},
                                                          {"chips_per_channel", chips_per_channel},
                                                          {"channels", channels},
                                                          {"blocks_per_plane", blocks_per_plane},
                                                          {"pages_per_block", pages_per_block}};
  for (auto [name, v] : counts) {
    if (v < 1) throw std::invalid_argument(std::string(name) + " must be >= 1");
  }
  if (!(page_read_energy >= 0) || !(page_program_latency >= 0) || !(block_erase_latency >= 0) ||
      !(page_program_energy >= 0) || !(block_erase_energy >= 0) || !(data_out_energy_per_byte >= 0) ||
      !(cache_hit_energy >= 0))
    throw std::invalid_argument("energy and program/erase constants must be non-negative");
  if (!(reserved_block_fraction >= 0.0 && reserved_block_fraction < 1.0))
    throw std::invalid_argument("reserved_block_fraction must lie in [0, 1)");
}

void FlashConfig::validate_for_vector(std::uint32_t vector_bytes) const {
  validate();
  if (vector_bytes == 0) throw std::invalid_argument("vector size must be positive");
  if (page_size % vector_bytes != 0)
    throw std::invalid_argument("page_size " + std::to_string(page_size) + " is not a multiple of the vector size " +
                                std::to_string(vector_bytes));
}

// Table I timing is shared by every cell type; only t_r differs per row.
// Program/erase figures are commodity ballpark values, not measured ones.
FlashConfig flash_preset(CellType cell) {
  FlashConfig c;
  c.cell_type = cell;
  switch (cell) {
    case CellType::SLC:
      c.page_size = 4096;
      c.timing.t_r = 25.0;
      c.page_read_energy = 7.39;
      c.blocks_per_plane = 32768;
      c.pages_per_block = 128;
      c.page_program_latency = 200.0;
      c.block_erase_latency = 1.5;
      c.page_program_energy = 15.0;
      c.block_erase_energy = 100.0;
      break;
    case CellType::TLC:
      c.page_size = 16384;
      c.timing.t_r = 60.0;
      c.page_read_energy = 69.06;
      c.blocks_per_plane = 4096;
      c.pages_per_block = 256;
      c.page_program_latency = 660.0;
      c.block_erase_latency = 3.5;
      c.page_program_energy = 150.0;
      c.block_erase_energy = 500.0;
      break;
    case CellType::QLC:
      c.page_size = 16384;
      c.timing.t_r = 140.0;
      c.page_read_energy = 110.99;
      c.blocks_per_plane = 4096;
      c.pages_per_block = 256;
      c.page_program_latency = 2000.0;
      c.block_erase_latency = 10.0;
      c.page_program_energy = 250.0;
      c.block_erase_energy = 700.0;
      break;
  }
  c.planes_per_die = 2;
  return c;
}

FlashConfig flash_preset(std::string_view name) { return flash_preset(parse_cell_type(name)); }

namespace {

struct Field {
  const char* key;
  std::function<std::string(const FlashConfig&)> get;
  std::function<void(FlashConfig&, const KvEntry&)> set;
};

template <typename T>
Field uint_field(const char* key, T FlashConfig::*member) {
  return {key, [member](const FlashConfig& c) { return std::to_string(c.*member); },
          [member](FlashConfig& c, const KvEntry& e) {
            auto v = kv_uint(e);
            if (v > 0xffffffffULL) throw ConfigError(e.line, "'" + e.key + "' is out of range");
            c.*member = static_cast<T>(v);
          }};
}

Field double_field(const char* key, double FlashConfig::*member) {
  return {key, [member](const FlashConfig& c) { return format_double(c.*member); },
          [member](FlashConfig& c, const KvEntry& e) { c.*member = kv_double(e); }};
}

Field timing_field(const char* key, double TimingParams::*member) {
  return {key, [member](const FlashConfig& c) { return format_double(c.timing.*member); },
          [member](FlashConfig& c, const KvEntry& e) { c.timing.*member = kv_double(e); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      {"cell_type", [](const FlashConfig& c) { return std::string(to_string(c.cell_type)); },
       [](FlashConfig& c, const KvEntry& e) {
         try {
           c.cell_type = parse_cell_type(e.value);
         } catch (const std::invalid_argument& ex) {
           throw ConfigError(e.line, ex.what());
         }
       }},
      uint_field("page_size", &FlashConfig::page_size),
      uint_field("planes_per_die", &FlashConfig::planes_per_die),
      uint_field("dies_per_chip", &FlashConfig::dies_per_chip),
      uint_field("chips_per_channel", &FlashConfig::chips_per_channel),
      uint_field("channels", &FlashConfig::channels),
      uint_field("blocks_per_plane", &FlashConfig::blocks_per_plane),
      uint_field("pages_per_block", &FlashConfig::pages_per_block),
      timing_field("t_alh_us", &TimingParams::t_alh),
      timing_field("t_als_us", &TimingParams::t_als),
      timing_field("t_ds_us", &TimingParams::t_ds),
      timing_field("t_wc_us", &TimingParams::t_wc),
      timing_field("t_r_us", &TimingParams::t_r),
      timing_field("t_rr_us", &TimingParams::t_rr),
      timing_field("t_rc_us", &TimingParams::t_rc),
      double_field("page_read_energy_uj", &FlashConfig::page_read_energy),
      double_field("page_program_latency_us", &FlashConfig::page_program_latency),
      double_field("block_erase_latency_ms", &FlashConfig::block_erase_latency),
      double_field("page_program_energy_uj", &FlashConfig::page_program_energy),
      double_field("block_erase_energy_uj", &FlashConfig::block_erase_energy),
      double_field("data_out_energy_per_byte_uj", &FlashConfig::data_out_energy_per_byte),
      double_field("cache_hit_energy_uj", &FlashConfig::cache_hit_energy),
      double_field("reserved_block_fraction", &FlashConfig::reserved_block_fraction),
  };
  return f;
}

}  // namespace

std::string serialize_flash_config(const FlashConfig& config) {
  std::string out = "# recflash flash config v1\n";
  for (const auto& f : fields()) {
    out += f.key;
    out += " = ";
    out += f.get(config);
    out += '\n';
  }
  return out;
}

FlashConfig parse_flash_config(std::string_view text) {
  auto entries = parse_kv(text);
  FlashConfig c = flash_preset(CellType::TLC);
  // A "preset" line selects the base row; it must come before overrides.
  for (const auto& e : entries) {
    if (e.key == "preset") {
      try {
        c = flash_preset(e.value);
      } catch (const std::invalid_argument& ex) {
        throw ConfigError(e.line, ex.what());
      }
    }
  }
  for (const auto& e : entries) {
    if (e.key == "preset") continue;
    bool found = false;
    for (const auto& f : fields()) {
      if (e.key == f.key) {
        f.set(c, e);
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError(e.line, "unknown key '" + e.key + "'");
  }
  c.validate();
  return c;
}

FlashConfig load_flash_config(const std::string& path) { return parse_flash_config(read_text_file(path)); }

std::ostream& operator<<(std::ostream& os, const PhysicalAddress& a) {
  return os << "ch" << a.channel << "/chip" << a.chip << "/die" << a.die << "/pl" << a.plane << "/blk" << a.block
            << "/pg" << a.page << "+" << a.offset;
}

void validate_address(const FlashConfig& c, const PhysicalAddress& a, std::uint32_t vector_bytes) {
  if (a.channel >= c.channels || a.chip >= c.chips_per_channel || a.die >= c.dies_per_chip ||
      a.plane >= c.planes_per_die || a.block >= c.blocks_per_plane || a.page >= c.pages_per_block)
    throw std::out_of_range("physical address outside the configured geometry");
  if (std::uint64_t{a.offset} + vector_bytes > c.page_size)
    throw std::out_of_range("vector at this offset would straddle the page boundary");
}

double command_address_time(const TimingParams& t) { return (t.t_alh + t.t_als - t.t_ds) + t.t_wc * 5 + t.t_ds; }

double data_out_time(const TimingParams& t, std::uint64_t n_bytes) {
  return t.t_rr + t.t_rc * static_cast<double>(n_bytes);
}

double single_page_read_time(const TimingParams& t, std::uint32_t vectors_in_page, std::uint32_t vector_bytes,
                             std::uint32_t page_size) {
  if (vectors_in_page < 1) throw std::invalid_argument("a page read needs at least one vector");
  if (std::uint64_t{vectors_in_page} * vector_bytes > page_size)
    throw std::invalid_argument("requested vectors do not fit in one page");
  return command_address_time(t) + t.t_r + vectors_in_page * data_out_time(t, vector_bytes);
}

TimingTicks::TimingTicks(const TimingParams& t)
    : alh(Picoseconds::from_us(t.t_alh)),
      als(Picoseconds::from_us(t.t_als)),
      ds(Picoseconds::from_us(t.t_ds)),
      wc(Picoseconds::from_us(t.t_wc)),
      r(Picoseconds::from_us(t.t_r)),
      rr(Picoseconds::from_us(t.t_rr)),
      rc(Picoseconds::from_us(t.t_rc)) {}

double read_energy(const FlashConfig& config, std::uint64_t page_reads) {
  return static_cast<double>(page_reads) * config.page_read_energy;
}

RemapCost remap_cost(const FlashConfig& c, std::uint64_t pages_moved, std::uint64_t blocks_erased) {
  RemapCost r;
  const auto pm = static_cast<double>(pages_moved);
  const auto be = static_cast<double>(blocks_erased);
  r.latency_us = pm * (c.timing.t_r + c.page_program_latency) + be * (c.block_erase_latency * 1000.0);
  r.energy_uj = pm * (c.page_read_energy + c.page_program_energy) + be * c.block_erase_energy;
  return r;
}

}  // namespace recflash
