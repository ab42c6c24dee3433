#include "recflash/remap.hpp"

#include "recflash/workload.hpp"

#include <map>
#include <stdexcept>

namespace recflash {

ManagedLayout::ManagedLayout(FrequencyTable table, const SlotGeometry& geo, LayoutKind kind)
    : table_(std::move(table)), geo_(geo), kind_(kind), pool_(geo_) {
  if (kind == LayoutKind::Baseline) throw std::invalid_argument("a managed layout needs af or af_pd placement");
  const auto& space = table_.space();
  const auto vpp = geo_.vectors_per_page();
  const auto n = table_.size();
  const auto managed_pages = (n + vpp - 1) / vpp;
  const auto stride = geo_.planes() * geo_.pages_per_block();
  home_page_ = (managed_pages + stride - 1) / stride * stride;
  const auto home_pages = (std::uint64_t{space.size()} + vpp - 1) / vpp;
  if (home_page_ + home_pages > geo_.usable_pages())
    throw CapacityError("device too small for managed and home regions", home_page_ + home_pages,
                        geo_.usable_pages());

  valid_.assign(geo_.total_blocks(), 0);
  pinned_.assign(geo_.total_blocks(), 0);
  initial_.reserve(n);
  std::vector<VectorKey> order = table_.order();
  for (std::uint64_t i = 0; i < order.size(); ++i) {
    const auto s = geo_.stream_slot(kind_, i);
    table_.assign(order[i], s);
    initial_.push_back(space.index(order[i]));
    ++valid_[block_of_slot(s)];
  }
  managed_entries_ = n;
  for (std::uint64_t p = 0; p < home_pages; ++p) pinned_[geo_.block_of_page(geo_.stream_page(kind_, home_page_ + p))] = 1;
}

SlotId ManagedLayout::home_slot(const VectorKey& key) const {
  table_.space().check(key);
  return geo_.stream_slot(kind_, home_page_ * geo_.vectors_per_page() + table_.space().index(key));
}

void ManagedLayout::resolve_all(const LookupQuery& query, std::vector<SlotId>& out) const {
  constexpr std::size_t kAhead = 16;  // table entries are cache misses at scale
  const auto n = query.size();
  out.resize(n);
  for (std::size_t i = 0; i < std::min(n, kAhead); ++i) table_.prefetch(query.key(i));
  for (std::size_t i = 0; i < n; ++i) {
    if (i + kAhead < n) table_.prefetch(query.key(i + kAhead));
    out[i] = resolve(query.key(i));
  }
}

std::optional<VectorKey> ManagedLayout::stored_key(SlotId slot) const {
  if (auto it = written_.find(slot); it != written_.end()) return table_.space().key(it->second);
  const auto page = geo_.page_of(slot);
  if (geo_.plane_of_page(page) >= geo_.planes()) return std::nullopt;
  if (page % geo_.pages_per_plane() >= geo_.usable_pages_per_plane()) return std::nullopt;
  const auto vpp = geo_.vectors_per_page();
  const auto i = geo_.stream_index_of_page(kind_, page) * vpp + slot % vpp;
  if (i < managed_entries_) return table_.space().key(initial_[i]);
  const auto home0 = home_page_ * vpp;
  if (i >= home0 && i - home0 < table_.space().size())
    return table_.space().key(static_cast<std::uint32_t>(i - home0));
  return std::nullopt;
}

SlotId ManagedLayout::take_cold_slot() {
  const auto vpp = geo_.vectors_per_page();
  if (!cold_page_ || cold_used_ == vpp) {
    const auto planes = geo_.planes();
    for (std::uint64_t k = 0; k < planes; ++k) {
      const auto p = (cold_rotor_ + k) % planes;
      if (pool_.available_pages_on_plane(FreePagePool::Front::Cold, p) > 0) {
        cold_page_ = pool_.take_page(FreePagePool::Front::Cold, p);
        cold_used_ = 0;
        cold_rotor_ = p + 1;
        break;
      }
      if (k + 1 == planes) throw CapacityError("no free page for cold assignment", 1, 0);
    }
  }
  return *cold_page_ * vpp + cold_used_++;
}

RemapPlan ManagedLayout::plan_reassignment(const UpdateSummary& summary) {
  if (pending_) throw std::logic_error("previous remap plan has not been applied");
  RemapPlan plan;
  if (summary.empty()) return plan;
  const auto vpp = geo_.vectors_per_page();
  const auto planes = geo_.planes();
  const auto& hot = summary.hot_region_keys_for_reassignment;
  const auto& direct = summary.direct_assignments;
  const std::uint64_t hot_pages = (hot.size() + vpp - 1) / vpp;
  const std::uint64_t cold_room = cold_page_ ? vpp - cold_used_ : 0;
  const std::uint64_t cold_pages = direct.size() > cold_room ? (direct.size() - cold_room + vpp - 1) / vpp : 0;

  // Capacity check before anything moves. Hot pages go to fresh blocks, so
  // the hot front's partially written blocks do not count.
  const auto ppb = geo_.pages_per_block();
  std::vector<std::uint64_t> room(planes);
  std::uint64_t total_room = 0;
  for (std::uint64_t p = 0; p < planes; ++p) {
    room[p] = pool_.free_blocks_on_plane(p) * ppb;
    total_room += room[p] + (pool_.available_pages_on_plane(FreePagePool::Front::Cold, p) - room[p]);
  }
  if (hot_pages + cold_pages > total_room)
    throw CapacityError("insufficient free pages for remapping", hot_pages + cold_pages, total_room);
  if (kind_ == LayoutKind::AF) {
    std::uint64_t hot_room = 0;
    for (auto r : room) hot_room += r;
    if (hot_pages > hot_room) throw CapacityError("insufficient free pages for remapping", hot_pages, hot_room);
  } else {
    for (std::uint64_t p = 0; p < planes; ++p) {
      const auto need = hot_pages / planes + (p < hot_pages % planes ? 1 : 0);
      if (need > room[p]) throw CapacityError("insufficient free pages on plane " + std::to_string(p), need, room[p]);
    }
  }

  pending_ = true;
  std::map<std::uint64_t, std::uint32_t> invalidated;
  auto retire = [&](SlotId old) {
    const auto b = block_of_slot(old);
    if (!pinned_[b]) ++invalidated[b];
  };
  for (auto b : pool_.close_front(FreePagePool::Front::Hot))
    if (valid_[b] == 0) invalidated.emplace(b, 0);

  plan.deltas.reserve(hot.size() + direct.size());
  std::uint64_t page = 0;
  std::uint64_t fill_plane = 0;
  for (std::size_t j = 0; j < hot.size(); ++j) {
    if (j % vpp == 0) {
      std::uint64_t plane;
      if (kind_ == LayoutKind::AF_PD) {
        plane = (j / vpp) % planes;
      } else {
        while (pool_.available_pages_on_plane(FreePagePool::Front::Hot, fill_plane) == 0) ++fill_plane;
        plane = fill_plane;
      }
      page = pool_.take_page(FreePagePool::Front::Hot, plane);
    }
    const auto old = resolve(hot[j]);
    retire(old);
    plan.deltas.push_back({hot[j], old, page * vpp + j % vpp, true});
  }
  plan.pages_moved = hot_pages;

  for (const auto& k : direct) {
    const bool opens = !cold_page_ || cold_used_ == vpp;
    const auto s = take_cold_slot();
    if (opens) ++plan.direct_pages;
    const auto old = resolve(k);
    retire(old);
    plan.deltas.push_back({k, old, s, false});
  }

  for (auto [b, n] : invalidated) {
    if (valid_[b] == n && !pool_.is_open(b)) plan.erase_blocks.push_back(b);
  }
  plan.blocks_erased = plan.erase_blocks.size();
  return plan;
}

void ManagedLayout::apply(const RemapPlan& plan) {
  if (!pending_ && !plan.deltas.empty()) throw std::logic_error("remap plan applied twice or out of order");
  const auto& space = table_.space();
  for (const auto& d : plan.deltas) {
    if (d.old_slot != kNoSlot) {
      const auto b = block_of_slot(d.old_slot);
      if (!pinned_[b] && valid_[b] > 0) --valid_[b];
    }
    ++valid_[block_of_slot(d.new_slot)];
    table_.assign(d.key, d.new_slot);
    written_[d.new_slot] = space.index(d.key);
  }
  for (auto b : plan.erase_blocks) {
    if (valid_[b] != 0) throw std::logic_error("erasing a block that still holds valid data");
    pool_.release_block(b);
  }
  pending_ = false;
}

}  // namespace recflash
