#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace recflash {

struct VectorKey {
  std::uint32_t table = 0;
  std::uint32_t row = 0;

  friend constexpr auto operator<=>(const VectorKey&, const VectorKey&) = default;
};

inline std::string to_string(const VectorKey& k);

struct KeyCount {
  VectorKey key;
  std::uint64_t count = 0;

  bool operator==(const KeyCount&) const = default;
};

// Dense numbering of every (table, row) pair of a model.
class KeySpace {
 public:
  KeySpace() = default;
  KeySpace(std::uint32_t tables, std::uint32_t rows_per_table) : tables_(tables), rows_(rows_per_table) {
    if (tables == 0 || rows_per_table == 0) throw std::invalid_argument("key space must be non-empty");
    if (std::uint64_t{tables} * rows_per_table >= std::numeric_limits<std::uint32_t>::max())
      throw std::invalid_argument("key space exceeds 2^32 - 1 vectors");
  }

  std::uint32_t tables() const { return tables_; }
  std::uint32_t rows_per_table() const { return rows_; }
  std::uint32_t size() const { return tables_ * rows_; }

  bool contains(const VectorKey& k) const { return k.table < tables_ && k.row < rows_; }
  std::uint32_t index(const VectorKey& k) const { return k.table * rows_ + k.row; }
  VectorKey key(std::uint32_t index) const { return {index / rows_, index % rows_}; }

  void check(const VectorKey& k) const {
    if (!contains(k)) throw std::out_of_range("key " + to_string(k) + " outside the key space");
  }

  bool operator==(const KeySpace&) const = default;

 private:
  std::uint32_t tables_ = 0;
  std::uint32_t rows_ = 0;
};

// Linear index of a vector-sized slot on the device (see SlotGeometry).
using SlotId = std::uint64_t;
inline constexpr SlotId kNoSlot = std::numeric_limits<SlotId>::max();

inline std::string to_string(const VectorKey& k) {
  return "(T" + std::to_string(k.table) + ",r" + std::to_string(k.row) + ")";
}

}  // namespace recflash

template <>
struct std::hash<recflash::VectorKey> {
  std::size_t operator()(const recflash::VectorKey& k) const noexcept {
    return std::hash<std::uint64_t>{}((std::uint64_t{k.table} << 32) | k.row);
  }
};
