#include "recflash/layout.hpp"

#include "recflash/workload.hpp"

#include <bit>
#include <cmath>
#include <ostream>

namespace recflash {

void AddressResolver::resolve_all(const LookupQuery& query, std::vector<SlotId>& out) const {
  out.resize(query.size());
  for (std::size_t i = 0; i < query.size(); ++i) out[i] = resolve(query.key(i));
}

std::string_view to_string(LayoutKind k) {
  switch (k) {
    case LayoutKind::Baseline:
      return "baseline";
    case LayoutKind::AF:
      return "af";
    case LayoutKind::AF_PD:
      return "af_pd";
  }
  return "?";
}

LayoutKind parse_layout_kind(std::string_view name) {
  if (name == "baseline") return LayoutKind::Baseline;
  if (name == "af") return LayoutKind::AF;
  if (name == "af_pd" || name == "af+pd") return LayoutKind::AF_PD;
  throw std::invalid_argument("unknown layout '" + std::string(name) + "' (valid: baseline, af, af_pd)");
}

LayoutPolicy LayoutPolicy::make(LayoutKind kind, const FlashConfig& config, std::uint32_t vector_bytes) {
  config.validate_for_vector(vector_bytes);
  return {kind, vector_bytes, config.page_size / vector_bytes};
}

SlotGeometry::SlotGeometry(const FlashConfig& config, std::uint32_t vector_bytes)
    : config_(config), vector_bytes_(vector_bytes) {
  config_.validate_for_vector(vector_bytes);
  vpp_ = config_.page_size / vector_bytes;
  planes_ = config_.total_planes();
  pages_per_plane_ = std::uint64_t{config_.blocks_per_plane} * config_.pages_per_block;
  auto r = static_cast<std::uint32_t>(std::floor(config_.reserved_block_fraction * config_.blocks_per_plane));
  if (config_.reserved_block_fraction > 0 && r == 0) r = 1;
  if (r >= config_.blocks_per_plane)
    throw std::invalid_argument("reserved blocks leave no usable block in a plane");
  reserved_blocks_ = r;
}

PhysicalAddress SlotGeometry::address(SlotId s) const {
  const auto page_id = s / vpp_;
  const auto plane_g = page_id / pages_per_plane_;
  if (plane_g >= planes_) throw std::out_of_range("slot " + std::to_string(s) + " beyond the device");
  const auto within = page_id % pages_per_plane_;
  PhysicalAddress a;
  a.block = static_cast<std::uint32_t>(within / config_.pages_per_block);
  a.page = static_cast<std::uint32_t>(within % config_.pages_per_block);
  a.offset = offset_of(s);
  a.plane = static_cast<std::uint32_t>(plane_g % config_.planes_per_die);
  const auto die_g = plane_g / config_.planes_per_die;
  a.die = static_cast<std::uint32_t>(die_g % config_.dies_per_chip);
  const auto chip_g = die_g / config_.dies_per_chip;
  a.chip = static_cast<std::uint32_t>(chip_g % config_.chips_per_channel);
  a.channel = static_cast<std::uint32_t>(chip_g / config_.chips_per_channel);
  return a;
}

SlotId SlotGeometry::slot(const PhysicalAddress& a) const {
  validate_address(config_, a, vector_bytes_);
  if (a.offset % vector_bytes_ != 0) throw std::invalid_argument("offset is not vector aligned");
  const std::uint64_t plane_g =
      ((std::uint64_t{a.channel} * config_.chips_per_channel + a.chip) * config_.dies_per_chip + a.die) *
          config_.planes_per_die +
      a.plane;
  return page_id(plane_g, a.block, a.page) * vpp_ + a.offset / vector_bytes_;
}

std::uint64_t SlotGeometry::stream_page(LayoutKind kind, std::uint64_t s) const {
  const auto upp = usable_pages_per_plane();
  if (s >= upp * planes_) throw CapacityError("placement exceeds usable pages", s + 1, upp * planes_);
  std::uint64_t plane, within;
  if (kind == LayoutKind::AF_PD) {
    plane = s % planes_;
    within = s / planes_;
  } else {
    plane = s / upp;
    within = s % upp;
  }
  return plane * pages_per_plane_ + within;
}

std::uint64_t SlotGeometry::stream_index_of_page(LayoutKind kind, std::uint64_t page_id) const {
  const auto plane = page_id / pages_per_plane_;
  const auto within = page_id % pages_per_plane_;
  if (within >= usable_pages_per_plane()) throw std::out_of_range("page lies in the reserved pool");
  if (kind == LayoutKind::AF_PD) return within * planes_ + plane;
  return plane * usable_pages_per_plane() + within;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

SeededPermutation::SeededPermutation(std::uint64_t n, std::uint64_t seed) : n_(n) {
  unsigned bits = n <= 4 ? 2 : static_cast<unsigned>(std::bit_width(n - 1));
  if (bits % 2) ++bits;
  half_bits_ = bits / 2;
  half_mask_ = (std::uint64_t{1} << half_bits_) - 1;
  std::uint64_t k = seed;
  for (auto& key : keys_) {
    k = splitmix64(k);
    key = k;
  }
}

std::uint64_t SeededPermutation::encrypt(std::uint64_t x) const {
  std::uint64_t l = x >> half_bits_, r = x & half_mask_;
  for (int i = 0; i < kRounds; ++i) {
    auto nl = r;
    r = l ^ (splitmix64(r ^ keys_[i]) & half_mask_);
    l = nl;
  }
  return (l << half_bits_) | r;
}

std::uint64_t SeededPermutation::decrypt(std::uint64_t y) const {
  std::uint64_t l = y >> half_bits_, r = y & half_mask_;
  for (int i = kRounds - 1; i >= 0; --i) {
    auto nr = l;
    l = r ^ (splitmix64(l ^ keys_[i]) & half_mask_);
    r = nr;
  }
  return (l << half_bits_) | r;
}

std::uint64_t SeededPermutation::operator()(std::uint64_t x) const {
  if (x >= n_) throw std::out_of_range("permutation argument out of range");
  auto y = encrypt(x);
  while (y >= n_) y = encrypt(y);
  return y;
}

std::uint64_t SeededPermutation::inverse(std::uint64_t y) const {
  if (y >= n_) throw std::out_of_range("permutation argument out of range");
  auto x = decrypt(y);
  while (x >= n_) x = decrypt(x);
  return x;
}

namespace {

void check_capacity(std::uint64_t n, const SlotGeometry& geo) {
  if (n > geo.usable_slots()) throw CapacityError("not enough vector slots for placement", n, geo.usable_slots());
}

std::vector<SlotId> place_stream(std::size_t n, const SlotGeometry& geo, LayoutKind kind) {
  check_capacity(n, geo);
  std::vector<SlotId> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = geo.stream_slot(kind, i);
  return out;
}

}  // namespace

std::vector<SlotId> place_baseline(std::span<const VectorKey> keys, const SlotGeometry& geo, std::uint64_t seed) {
  check_capacity(keys.size(), geo);
  SeededPermutation perm(geo.usable_slots(), seed);
  std::vector<SlotId> out(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) out[i] = geo.stream_slot(LayoutKind::AF, perm(i));
  return out;
}

std::vector<SlotId> place_af(std::span<const VectorKey> sorted_keys, const SlotGeometry& geo) {
  return place_stream(sorted_keys.size(), geo, LayoutKind::AF);
}

std::vector<SlotId> place_af_pd(std::span<const VectorKey> sorted_keys, const SlotGeometry& geo) {
  return place_stream(sorted_keys.size(), geo, LayoutKind::AF_PD);
}

void write_assignment_csv(std::ostream& out, std::span<const VectorKey> keys, std::span<const SlotId> slots,
                          const SlotGeometry& geo) {
  if (keys.size() != slots.size()) throw std::invalid_argument("keys and slots differ in length");
  out << "table,row,channel,chip,die,plane,block,page,offset\n";
  for (std::size_t i = 0; i < keys.size(); ++i) {
    auto a = geo.address(slots[i]);
    out << keys[i].table << ',' << keys[i].row << ',' << a.channel << ',' << a.chip << ',' << a.die << ','
        << a.plane << ',' << a.block << ',' << a.page << ',' << a.offset << '\n';
  }
}

BaselineMapping::BaselineMapping(const SlotGeometry& geo, KeySpace space, std::uint64_t seed)
    : geo_(geo), space_(space), seed_(seed), perm_(geo.usable_slots(), seed) {
  check_capacity(space.size(), geo);
}

SlotId BaselineMapping::resolve(const VectorKey& key) const {
  space_.check(key);
  return geo_.stream_slot(LayoutKind::AF, perm_(space_.index(key)));
}

std::optional<VectorKey> BaselineMapping::stored_key(SlotId slot) const {
  const auto page = geo_.page_of(slot);
  if (geo_.plane_of_page(page) >= geo_.planes()) return std::nullopt;
  if (page % geo_.pages_per_plane() >= geo_.usable_pages_per_plane()) return std::nullopt;
  const auto i = geo_.stream_index_of_page(LayoutKind::AF, page) * geo_.vectors_per_page() +
                 slot % geo_.vectors_per_page();
  const auto d = perm_.inverse(i);
  if (d >= space_.size()) return std::nullopt;
  return space_.key(static_cast<std::uint32_t>(d));
}

FreePagePool::FreePagePool(const SlotGeometry& geo)
    : ppb_(geo.pages_per_block()), bpp_(geo.config().blocks_per_plane), free_(geo.planes()), hot_(geo.planes()), cold_(geo.planes()) {
  const auto bpp = bpp_;
  for (std::uint64_t p = 0; p < geo.planes(); ++p)
    for (std::uint32_t b = geo.usable_blocks(); b < bpp; ++b) free_[p].push_back(p * bpp + b);
}

std::uint64_t FreePagePool::free_blocks() const {
  std::uint64_t n = 0;
  for (const auto& f : free_) n += f.size();
  return n;
}

std::uint64_t FreePagePool::available_pages_on_plane(Front f, std::uint64_t plane) const {
  const auto& o = (f == Front::Hot ? hot_ : cold_)[plane];
  const auto ppb = ppb_;
  return free_[plane].size() * ppb + (o.block ? ppb - o.next_page : 0);
}

std::uint64_t FreePagePool::available_pages(Front f) const {
  std::uint64_t n = 0;
  for (std::uint64_t p = 0; p < free_.size(); ++p) n += available_pages_on_plane(f, p);
  return n;
}

std::vector<std::uint64_t> FreePagePool::close_front(Front f) {
  std::vector<std::uint64_t> closed;
  for (auto& o : (f == Front::Hot ? hot_ : cold_)) {
    if (o.block) closed.push_back(*o.block);
    o = {};
  }
  return closed;
}

std::uint64_t FreePagePool::take_page(Front f, std::uint64_t plane) {
  auto& o = (f == Front::Hot ? hot_ : cold_)[plane];
  const auto ppb = ppb_;
  if (!o.block || o.next_page == ppb) {
    if (free_[plane].empty())
      throw CapacityError("no free block left on plane " + std::to_string(plane), 1, 0);
    o.block = free_[plane].front();
    free_[plane].pop_front();
    o.next_page = 0;
  }
  return *o.block * ppb + o.next_page++;
}

bool FreePagePool::is_open(std::uint64_t block) const {
  const auto p = block / bpp_;
  return hot_[p].block == block || cold_[p].block == block;
}

void FreePagePool::release_block(std::uint64_t block) { free_[block / bpp_].push_back(block); }

}  // namespace recflash
