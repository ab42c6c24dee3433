#include "recflash/cache.hpp"

#include <stdexcept>

namespace recflash {

PageCache::PageCache(std::uint64_t capacity_bytes, std::uint32_t page_size)
    : capacity_bytes_(capacity_bytes),
      lru_(page_size == 0 ? throw std::invalid_argument("page size must be positive")
                          : static_cast<std::size_t>(capacity_bytes / page_size)) {}

CacheResult<std::uint64_t> PageCache::access_page(std::uint64_t page) {
  auto r = lru_.access(page);
  ++(r.hit ? hits_ : misses_);
  return r;
}

void PageCache::flush() {
  lru_.clear();
  ++flushes_;
}

CacheResult<VectorKey> VectorCache::access_vector(const VectorKey& key) {
  auto [it, inserted] = tables_.try_emplace(key.table, per_table_);
  auto r = it->second.access(key.row);
  ++(r.hit ? hits_ : misses_);
  CacheResult<VectorKey> out{r.hit, std::nullopt};
  if (r.evicted) out.evicted = VectorKey{key.table, *r.evicted};
  return out;
}

bool VectorCache::contains(const VectorKey& key) const {
  auto it = tables_.find(key.table);
  return it != tables_.end() && it->second.contains(key.row);
}

std::size_t VectorCache::occupancy(std::uint32_t table) const {
  auto it = tables_.find(table);
  return it == tables_.end() ? 0 : it->second.size();
}

}  // namespace recflash
