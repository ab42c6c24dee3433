#pragma once

#include <cstdint>
#include <list>
#include <optional>
#include <unordered_map>
#include <vector>

#include "recflash/keys.hpp"

namespace recflash {

template <typename T>
struct CacheResult {
  bool hit = false;
  std::optional<T> evicted;  // only on a miss that displaced an entry

  bool operator==(const CacheResult&) const = default;
};

// Fixed-capacity LRU set. Front of the recency list is most recent.
template <typename K>
class LruSet {
 public:
  explicit LruSet(std::size_t capacity = 0) : capacity_(capacity) {}

  CacheResult<K> access(const K& k) {
    if (auto it = index_.find(k); it != index_.end()) {
      order_.splice(order_.begin(), order_, it->second);
      return {true, std::nullopt};
    }
    CacheResult<K> r;
    if (capacity_ == 0) return r;
    if (order_.size() == capacity_) {
      r.evicted = order_.back();
      index_.erase(order_.back());
      order_.pop_back();
    }
    order_.push_front(k);
    index_.emplace(k, order_.begin());
    return r;
  }

  bool contains(const K& k) const { return index_.contains(k); }
  std::size_t size() const { return order_.size(); }
  std::size_t capacity() const { return capacity_; }
  void clear() {
    order_.clear();
    index_.clear();
  }
  // Most recent first.
  std::vector<K> recency() const { return {order_.begin(), order_.end()}; }

 private:
  std::size_t capacity_;
  std::list<K> order_;
  std::unordered_map<K, typename std::list<K>::iterator> index_;
};

// Controller SRAM holding whole pages, LRU replacement.
class PageCache {
 public:
  static constexpr std::uint64_t kDefaultCapacityBytes = 131072;

  PageCache(std::uint64_t capacity_bytes, std::uint32_t page_size);

  // Page ids are device-wide (plane-qualified) page numbers.
  CacheResult<std::uint64_t> access_page(std::uint64_t page);
  bool contains(std::uint64_t page) const { return lru_.contains(page); }
  void flush();

  std::uint64_t capacity_bytes() const { return capacity_bytes_; }
  std::size_t capacity_pages() const { return lru_.capacity(); }
  std::size_t size() const { return lru_.size(); }
  std::uint64_t hits() const { return hits_; }
  std::uint64_t misses() const { return misses_; }
  std::uint64_t flushes() const { return flushes_; }
  std::vector<std::uint64_t> recency() const { return lru_.recency(); }

 private:
  std::uint64_t capacity_bytes_;
  LruSet<std::uint64_t> lru_;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
  std::uint64_t flushes_ = 0;
};

// Per-table LRU of individual vectors (host DRAM cache of the baselines).
class VectorCache {
 public:
  static constexpr std::size_t kDefaultPerTable = 2048;

  explicit VectorCache(std::size_t per_table_capacity = kDefaultPerTable) : per_table_(per_table_capacity) {}

  CacheResult<VectorKey> access_vector(const VectorKey& key);
  bool contains(const VectorKey& key) const;
  std::size_t per_table_capacity() const { return per_table_; }
  std::size_t occupancy(std::uint32_t table) const;
  std::uint64_t hits() const { return hits_; }
  std::uint64_t misses() const { return misses_; }
  void clear() { tables_.clear(); }

 private:
  std::size_t per_table_;
  std::unordered_map<std::uint32_t, LruSet<std::uint32_t>> tables_;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
};

}  // namespace recflash
