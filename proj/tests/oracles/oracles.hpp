// Reference models used only by the tests. Each one is written
// from the textual definition, sharing no code with the library beyond plain
// data types.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

// O(n) list LRU. Most recent at the front.
template <typename K>
class NaiveLru {
 public:
  explicit NaiveLru(std::size_t cap) : cap_(cap) {}
  bool access(const K& k) {
    auto it = std::find(items_.begin(), items_.end(), k);
    if (it != items_.end()) {
      items_.erase(it);
      items_.insert(items_.begin(), k);
      return true;
    }
    if (cap_ == 0) return false;
    if (items_.size() == cap_) items_.pop_back();
    items_.insert(items_.begin(), k);
    return false;
  }
  const std::vector<K>& items() const { return items_; }

 private:
  std::size_t cap_;
  std::vector<K> items_;
};

// Literal replay of the frequency-list update over a plain vector. Keys are
// opaque integers; `counts` holds f_k.
struct ListReplay {
  std::vector<std::uint64_t> list;  // head first
  std::map<std::uint64_t, std::uint64_t> counts;
  std::uint64_t tau = 0;

  // Hot fraction x = x_per_mille / 1000; rank ceil(x * n) in exact integers.
  static ListReplay build(std::vector<std::pair<std::uint64_t, std::uint64_t>> kc, std::uint64_t x_per_mille) {
    std::sort(kc.begin(), kc.end(),
              [](auto& a, auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; });
    ListReplay r;
    for (auto [k, c] : kc) {
      r.list.push_back(k);
      r.counts[k] = c;
    }
    auto rank = (x_per_mille * kc.size() + 999) / 1000;
    rank = std::clamp<std::uint64_t>(rank, 1, kc.size());
    r.tau = r.list[rank - 1];
    return r;
  }

  std::size_t pos(std::uint64_t k) const { return std::find(list.begin(), list.end(), k) - list.begin(); }
  std::optional<std::uint64_t> prev(std::uint64_t k) const {
    auto p = pos(k);
    if (p == 0) return std::nullopt;
    return list[p - 1];
  }

  // Insertion pass; returns the keys that are new (not already in the list).
  std::vector<std::uint64_t> update(const std::vector<std::pair<std::uint64_t, std::uint64_t>>& trained) {
    std::vector<std::uint64_t> fresh;
    std::optional<std::uint64_t> tau_prev = prev(tau);
    for (auto [k, f] : trained) {
      if (counts.count(k)) continue;  // only new keys are inserted
      counts[k] = f;
      fresh.push_back(k);
      std::size_t ptr = 0;
      bool flag = false;
      while (list[ptr] != tau) {
        if (f > counts[list[ptr]]) {
          list.insert(list.begin() + static_cast<std::ptrdiff_t>(ptr), k);
          auto tp = pos(tau);
          list.erase(list.begin() + static_cast<std::ptrdiff_t>(tp));
          list.push_back(tau);
          tau = *tau_prev;
          tau_prev = prev(*tau_prev);
          flag = true;
          break;
        }
        ++ptr;
      }
      if (!flag) list.push_back(k);
    }
    return fresh;
  }

  // Keys whose address is (re)assigned.
  std::set<std::uint64_t> changed(const std::vector<std::uint64_t>& fresh) const {
    std::set<std::uint64_t> out;
    const auto t = pos(tau);
    for (std::size_t i = 0; i <= t; ++i) out.insert(list[i]);
    for (auto k : fresh)
      if (pos(k) > t) out.insert(k);
    return out;
  }
};

// Single-plane closed form: pages are read one after another, each costing
// C/A + t_R + data-out. Times in integer picoseconds, converted here.
struct ClosedFormTiming {
  std::int64_t ca, r, rr, rc;

  static std::int64_t ps(double us) { return static_cast<std::int64_t>(std::llround(us * 1e6)); }
  // t_alh, t_als, t_ds, t_wc, t_r, t_rr, t_rc
  ClosedFormTiming(double alh, double als, double ds, double wc, double tr, double trr, double trc)
      : ca(ps(alh) + ps(als) - ps(ds) + 5 * ps(wc) + ps(ds)), r(ps(tr)), rr(ps(trr)), rc(ps(trc)) {}

  std::int64_t data_out(std::uint64_t bytes) const { return rr + rc * static_cast<std::int64_t>(bytes); }

  // page -> set of byte offsets requested in it
  std::int64_t selective(const std::map<std::uint64_t, std::set<std::uint32_t>>& pages, std::uint32_t v) const {
    std::int64_t t = 0;
    for (auto& [p, offs] : pages) t += ca + r + static_cast<std::int64_t>(offs.size()) * data_out(v);
    return t;
  }
  std::int64_t sequential(const std::map<std::uint64_t, std::set<std::uint32_t>>& pages, std::uint32_t v) const {
    std::int64_t t = 0;
    for (auto& [p, offs] : pages) t += ca + r + data_out(*offs.rbegin() + v);
    return t;
  }
};

}  // namespace oracle
