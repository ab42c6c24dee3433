#include "recflash/mapping_table.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_set>

namespace recflash {

MissingKeyError::MissingKeyError(const VectorKey& key, MissingKeyReason reason)
    : std::out_of_range("key " + to_string(key) +
                        (reason == MissingKeyReason::Evicted ? " was evicted from the mapping table"
                                                             : " was never trained into the mapping table")),
      key_(key),
      reason_(reason) {}

std::uint64_t threshold_rank(std::uint64_t n, double hot_fraction) {
  if (!(hot_fraction > 0.0 && hot_fraction <= 1.0)) throw std::invalid_argument("hot_fraction must lie in (0, 1]");
  if (n == 0) return 0;
  // Shave a relative 1e-12 so that exact products such as 0.1 * 30 do not
  // round up past the intended rank.
  auto r = static_cast<std::uint64_t>(std::ceil(hot_fraction * static_cast<double>(n) * (1.0 - 1e-12)));
  return std::clamp<std::uint64_t>(r, 1, n);
}

FrequencyTable::FrequencyTable(KeySpace space, double hot_fraction) : space_(space), hot_fraction_(hot_fraction) {
  threshold_rank(1, hot_fraction);  // validates the fraction
  const auto n = space.size();
  count_.assign(n, 0);
  prev_.assign(n, kNil);
  next_.assign(n, kNil);
  slot_.assign(n, kNoSlot);
  state_.assign(n, 0);
}

void FrequencyTable::link_in_order(std::span<const std::uint32_t> order) {
  head_ = tail_ = kNil;
  std::uint32_t last = kNil;
  for (auto i : order) {
    prev_[i] = last;
    next_[i] = kNil;
    if (last != kNil) next_[last] = i;
    else head_ = i;
    state_[i] = kPresent;
    last = i;
  }
  tail_ = last;
  size_ = order.size();
  hot_size_ = threshold_rank(size_, hot_fraction_);
  threshold_ = order[hot_size_ - 1];
  for (std::uint64_t r = 0; r < hot_size_; ++r) state_[order[r]] |= kHot;
}

FrequencyTable FrequencyTable::build_from_counts(KeySpace space, std::span<const KeyCount> counts,
                                                 double hot_fraction) {
  if (counts.empty()) throw std::invalid_argument("a frequency table needs at least one entry");
  FrequencyTable t(space, hot_fraction);
  std::vector<std::uint32_t> order;
  order.reserve(counts.size());
  for (const auto& kc : counts) {
    space.check(kc.key);
    auto i = space.index(kc.key);
    if (t.state_[i] & kPresent) throw std::invalid_argument("duplicate key " + to_string(kc.key) + " in counts");
    if (kc.count > 0xffffffffULL) throw std::invalid_argument("access count exceeds 32 bits");
    t.state_[i] = kPresent;
    t.count_[i] = static_cast<std::uint32_t>(kc.count);
    order.push_back(i);
  }
  // Dense index order equals (table, row) order.
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (t.count_[a] != t.count_[b]) return t.count_[a] > t.count_[b];
    return a < b;
  });
  t.link_in_order(order);
  return t;
}

FrequencyTable FrequencyTable::build_from_dense_counts(KeySpace space, std::span<const std::uint32_t> counts,
                                                       double hot_fraction) {
  if (counts.size() != space.size()) throw std::invalid_argument("dense counts do not match the key space");
  // Counting sort over the distinct count values; scanning indices in
  // ascending order keeps ties key-ascending.
  std::map<std::uint32_t, std::uint64_t, std::greater<>> histogram;
  for (auto c : counts)
    if (c > 0) ++histogram[c];
  if (histogram.empty()) throw std::invalid_argument("a frequency table needs at least one entry");
  std::map<std::uint32_t, std::uint64_t, std::greater<>> start;
  std::uint64_t total = 0;
  for (auto [c, n] : histogram) {
    start[c] = total;
    total += n;
  }
  std::vector<std::uint32_t> order(total);
  for (std::uint32_t i = 0; i < counts.size(); ++i)
    if (counts[i] > 0) order[start[counts[i]]++] = i;
  FrequencyTable t(space, hot_fraction);
  for (auto i : order) t.count_[i] = counts[i];
  t.link_in_order(order);
  return t;
}

void FrequencyTable::unlink(std::uint32_t i, std::uint64_t& writes) {
  const auto p = prev_[i];
  const auto n = next_[i];
  if (p != kNil) {
    next_[p] = n;
    ++writes;
  } else {
    head_ = n;
  }
  if (n != kNil) {
    prev_[n] = p;
    ++writes;
  } else {
    tail_ = p;
  }
  prev_[i] = next_[i] = kNil;
  writes += 2;
}

void FrequencyTable::insert_before(std::uint32_t i, std::uint32_t before, std::uint64_t& writes) {
  const auto p = prev_[before];
  prev_[i] = p;
  next_[i] = before;
  prev_[before] = i;
  writes += 3;
  if (p != kNil) {
    next_[p] = i;
    ++writes;
  } else {
    head_ = i;
  }
}

void FrequencyTable::push_back(std::uint32_t i, std::uint64_t& writes) {
  prev_[i] = tail_;
  next_[i] = kNil;
  writes += 2;
  if (tail_ != kNil) {
    next_[tail_] = i;
    ++writes;
  } else {
    head_ = i;
  }
  tail_ = i;
}

UpdateSummary FrequencyTable::adaptive_update(std::span<const KeyCount> trained) {
  UpdateSummary s;
  {
    std::unordered_set<VectorKey> seen;
    seen.reserve(trained.size());
    for (const auto& kc : trained) {
      space_.check(kc.key);
      if (!seen.insert(kc.key).second) throw std::invalid_argument("duplicate key " + to_string(kc.key) + " in trained set");
      if (kc.count > 0xffffffffULL) throw std::invalid_argument("access count exceeds 32 bits");
    }
  }
  std::vector<std::uint32_t> new_keys;
  for (const auto& kc : trained) {
    const auto k = space_.index(kc.key);
    const auto f_new = static_cast<std::uint32_t>(kc.count);
    if (state_[k] & kPresent) {
      if (!(state_[k] & kHot)) {
        count_[k] = f_new;
        ++s.keys_refreshed;
      }
      continue;
    }
    state_[k] = kPresent;
    count_[k] = f_new;
    slot_[k] = kNoSlot;
    new_keys.push_back(k);
    ++size_;

    // Comparator: [head, threshold) is non-increasing, so the scan below can
    // only find an insertion point if f_new beats its last element.
    const auto tau_prev = threshold_ == kNil ? kNil : prev_[threshold_];
    ++s.comparisons;
    bool inserted = false;
    if (tau_prev != kNil && f_new > count_[tau_prev]) {
      for (auto ptr = head_; ptr != threshold_; ptr = next_[ptr]) {
        ++s.comparisons;
        if (f_new > count_[ptr]) {
          insert_before(k, ptr, s.pointer_writes);
          state_[k] |= kHot;
          const auto tau = threshold_;
          const auto new_tau = prev_[tau];
          if (tau != tail_) {
            unlink(tau, s.pointer_writes);
            push_back(tau, s.pointer_writes);
          }
          state_[tau] &= static_cast<std::uint8_t>(~kHot);
          threshold_ = new_tau;
          inserted = true;
          ++s.keys_inserted_hot;
          break;
        }
      }
    }
    if (!inserted) {
      push_back(k, s.pointer_writes);
      ++s.keys_appended_tail;
    }
  }

  // The hot region [head, tau] is reassigned even when nothing was inserted.
  if (threshold_ != kNil)
    for (auto i = head_;; i = next_[i]) {
      s.hot_region_keys_for_reassignment.push_back(space_.key(i));
      if (i == threshold_) break;
    }
  for (auto k : new_keys)
    if (!(state_[k] & kHot)) s.direct_assignments.push_back(space_.key(k));
  return s;
}

std::uint32_t FrequencyTable::index_of(const VectorKey& key) const {
  space_.check(key);
  const auto i = space_.index(key);
  if (!(state_[i] & kPresent))
    throw MissingKeyError(key, (state_[i] & kEvicted) ? MissingKeyReason::Evicted : MissingKeyReason::NeverTrained);
  return i;
}

SlotId FrequencyTable::lookup(const VectorKey& key) const {
  const auto i = index_of(key);
  if (slot_[i] == kNoSlot) throw std::logic_error("key " + to_string(key) + " has no address assigned yet");
  return slot_[i];
}

void FrequencyTable::record_access(const VectorKey& key) {
  const auto i = index_of(key);
  if (count_[i] != 0xffffffffu) ++count_[i];
}

void FrequencyTable::assign(const VectorKey& key, SlotId slot) { slot_[index_of(key)] = slot; }

void FrequencyTable::evict(const VectorKey& key) {
  const auto i = index_of(key);
  if (size_ == 1) throw std::logic_error("cannot evict the last entry of a frequency table");
  std::uint64_t writes = 0;
  // Shrink the hot region rather than pulling an arbitrary entry into it.
  if (i == threshold_) {
    if (prev_[i] != kNil) {
      threshold_ = prev_[i];
      --hot_size_;
    } else {
      threshold_ = next_[i];
      state_[threshold_] |= kHot;
    }
  } else if (state_[i] & kHot) {
    --hot_size_;
  }
  unlink(i, writes);
  state_[i] = kEvicted;
  slot_[i] = kNoSlot;
  count_[i] = 0;
  --size_;
}

bool FrequencyTable::in_hot_region(const VectorKey& key) const { return state_[index_of(key)] & kHot; }
std::uint64_t FrequencyTable::count(const VectorKey& key) const { return count_[index_of(key)]; }
std::optional<VectorKey> FrequencyTable::prev(const VectorKey& key) const { return opt_key(prev_[index_of(key)]); }
std::optional<VectorKey> FrequencyTable::next(const VectorKey& key) const { return opt_key(next_[index_of(key)]); }

std::vector<VectorKey> FrequencyTable::order() const {
  std::vector<VectorKey> out;
  out.reserve(size_);
  for (auto i = head_; i != kNil; i = next_[i]) out.push_back(space_.key(i));
  return out;
}

std::vector<VectorKey> FrequencyTable::hot_region() const {
  std::vector<VectorKey> out;
  if (threshold_ == kNil) return out;
  for (auto i = head_;; i = next_[i]) {
    out.push_back(space_.key(i));
    if (i == threshold_) break;
  }
  return out;
}

void FrequencyTable::audit() const {
  auto fail = [](const std::string& m) { throw std::logic_error("frequency table audit: " + m); };
  if (size_ == 0) {
    if (head_ != kNil || tail_ != kNil) fail("empty table with dangling head/tail");
    return;
  }
  if (head_ == kNil || prev_[head_] != kNil) fail("bad head");
  if (tail_ == kNil || next_[tail_] != kNil) fail("bad tail");
  std::uint64_t visited = 0, hot = 0;
  bool in_hot = true, saw_threshold = false;
  std::uint32_t last = kNil;
  for (auto i = head_; i != kNil; i = next_[i]) {
    if (++visited > size_) fail("cycle or size mismatch");
    if (!(state_[i] & kPresent)) fail("linked entry not marked present");
    if (prev_[i] != last) fail("prev/next mismatch at " + to_string(space_.key(i)));
    const bool flagged = state_[i] & kHot;
    if (flagged != in_hot) fail("hot flag disagrees with list position at " + to_string(space_.key(i)));
    if (in_hot) {
      ++hot;
      if (last != kNil && count_[i] > count_[last]) fail("hot region not non-increasing at " + to_string(space_.key(i)));
    }
    if (i == threshold_) {
      saw_threshold = true;
      in_hot = false;
    }
    last = i;
  }
  if (last != tail_) fail("walk does not end at tail");
  if (visited != size_) fail("walk does not cover every entry");
  if (!saw_threshold) fail("threshold key not on the list");
  if (hot != hot_size_) fail("hot region size drifted");
  std::uint64_t present = 0;
  for (auto st : state_)
    if (st & kPresent) ++present;
  if (present != size_) fail("present-entry count mismatch");
}

namespace {

void put_u32(std::ostream& o, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  o.write(reinterpret_cast<const char*>(b), 4);
}
void put_u64(std::ostream& o, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  o.write(reinterpret_cast<const char*>(b), 8);
}
std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("truncated mapping-table snapshot");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[i]} << (8 * i);
  return v;
}
std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("truncated mapping-table snapshot");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
  return v;
}

constexpr char kMagic[4] = {'R', 'F', 'H', 'T'};
constexpr std::uint32_t kSnapshotVersion = 1;

}  // namespace

void FrequencyTable::save(std::ostream& out) const {
  out.write(kMagic, 4);
  put_u32(out, kSnapshotVersion);
  put_u32(out, space_.tables());
  put_u32(out, space_.rows_per_table());
  put_u64(out, std::bit_cast<std::uint64_t>(hot_fraction_));
  put_u64(out, size_);
  put_u64(out, hot_size_);
  std::uint64_t evicted = 0;
  for (auto st : state_)
    if (st & kEvicted) ++evicted;
  put_u64(out, evicted);
  std::uint64_t pos = 0;
  for (auto i = head_; i != kNil; i = next_[i]) {
    const auto k = space_.key(i);
    put_u64(out, pos++);
    put_u32(out, k.table);
    put_u32(out, k.row);
    put_u64(out, count_[i]);
    put_u64(out, slot_[i]);
  }
  for (std::uint32_t i = 0; i < state_.size(); ++i) {
    if (state_[i] & kEvicted) {
      const auto k = space_.key(i);
      put_u32(out, k.table);
      put_u32(out, k.row);
    }
  }
  if (!out) throw std::runtime_error("failed writing mapping-table snapshot");
}

FrequencyTable FrequencyTable::load(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("not a mapping-table snapshot");
  const auto version = get_u32(in);
  if (version != kSnapshotVersion) throw std::runtime_error("unsupported snapshot version " + std::to_string(version));
  const auto tables = get_u32(in);
  const auto rows = get_u32(in);
  const auto hot_fraction = std::bit_cast<double>(get_u64(in));
  const auto n = get_u64(in);
  const auto hot = get_u64(in);
  const auto evicted = get_u64(in);
  KeySpace space(tables, rows);
  if (n == 0 || n > space.size() || hot == 0 || hot > n) throw std::runtime_error("corrupt snapshot header");
  FrequencyTable t(space, hot_fraction);
  std::vector<std::uint32_t> order;
  order.reserve(n);
  for (std::uint64_t p = 0; p < n; ++p) {
    if (get_u64(in) != p) throw std::runtime_error("snapshot order index out of sequence");
    VectorKey k{get_u32(in), get_u32(in)};
    space.check(k);
    const auto i = space.index(k);
    if (t.state_[i] & kPresent) throw std::runtime_error("duplicate key in snapshot");
    t.state_[i] = kPresent;
    const auto c = get_u64(in);
    if (c > 0xffffffffULL) throw std::runtime_error("snapshot count out of range");
    t.count_[i] = static_cast<std::uint32_t>(c);
    t.slot_[i] = get_u64(in);
    order.push_back(i);
  }
  t.link_in_order(order);
  // The stored hot size wins over the recomputed rank: after updates and
  // appends the two differ.
  for (std::uint64_t r = 0; r < order.size(); ++r) {
    if (r < hot) t.state_[order[r]] |= kHot;
    else t.state_[order[r]] &= static_cast<std::uint8_t>(~kHot);
  }
  t.hot_size_ = hot;
  t.threshold_ = order[hot - 1];
  for (std::uint64_t e = 0; e < evicted; ++e) {
    VectorKey k{get_u32(in), get_u32(in)};
    space.check(k);
    if (t.state_[space.index(k)] & kPresent) throw std::runtime_error("snapshot key both present and evicted");
    t.state_[space.index(k)] = kEvicted;
  }
  return t;
}

}  // namespace recflash
