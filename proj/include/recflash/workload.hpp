#pragma once

#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "recflash/keys.hpp"
#include "recflash/layout.hpp"

namespace recflash {

struct DlrmPreset {
  std::string name = "RMC2";
  std::uint32_t num_tables = 32;
  std::uint32_t embedding_dim = 64;
  std::uint32_t lookups_per_query = 120;  // per table
  std::string bottom_mlp = "256-128-64";
  std::string top_mlp = "128-64-1";

  std::uint32_t vector_bytes() const { return embedding_dim * 4; }  // fp32
  void validate() const;
  bool operator==(const DlrmPreset&) const = default;
};

// "rmc1", "rmc2", "rmc3" (case-insensitive).
DlrmPreset dlrm_preset(std::string_view name);
std::vector<int> parse_mlp_layers(std::string_view layers);

// Locality presets: K0 0.08, K0.3 0.15, K0.8 0.35, K1 0.45, K2 0.66.
double locality_preset(std::string_view name);
const std::vector<std::pair<std::string, double>>& locality_presets();

struct TraceSpec {
  std::uint32_t rows_per_table = 1'000'000;
  double unique_rate = 0.08;
  DlrmPreset preset{};
  std::uint64_t num_queries = 10'000;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;       // independent query sample of the same distribution
  std::uint32_t days = 1;         // queries split evenly into day segments
  double drift = 0.1;             // per-day chance that a hot rank is replaced
  std::uint32_t hot_keys = 1024;  // upper bound on the per-table hot set
  double zipf_exponent = 1.0;

  void validate() const;
};

struct LookupQuery {
  std::uint32_t tables = 0;
  std::uint32_t lookups = 0;
  std::vector<std::uint32_t> rows;  // table-major, tables * lookups entries

  std::size_t size() const { return rows.size(); }
  VectorKey key(std::size_t i) const { return {static_cast<std::uint32_t>(i / lookups), rows[i]}; }
  std::span<const std::uint32_t> table_rows(std::uint32_t t) const {
    return std::span<const std::uint32_t>(rows).subspan(std::size_t{t} * lookups, lookups);
  }
  bool operator==(const LookupQuery&) const = default;
};

struct TraceEvent {
  enum class Kind { Query, DayBoundary };
  Kind kind = Kind::Query;
  std::uint32_t day = 0;  // for DayBoundary: the day that starts here
  LookupQuery query;

  bool operator==(const TraceEvent&) const = default;
};

class QueryStream {
 public:
  virtual ~QueryStream() = default;
  // Fills `out` and returns true, or returns false at end of stream.
  virtual bool next(TraceEvent& out) = 0;
  virtual std::uint32_t tables() const = 0;
  virtual std::uint32_t lookups() const = 0;
};

// Sizing of the two-tier hot/cold model for one day segment of one table.
struct LocalityPlan {
  std::uint32_t hot_keys = 0;
  double cold_probability = 0.0;
  double expected_unique_rate = 0.0;
};

// Expected distinct keys after n Zipf(s) draws over h ranks.
double expected_distinct_zipf(std::uint32_t h, double s, double n);
// Throws std::invalid_argument naming the feasible range when the target
// unique rate cannot be produced.
LocalityPlan plan_locality(const TraceSpec& spec);

// Synthetic locality-controlled stream.
//
// Per table, a seeded permutation of the rows provides the hot set (the first
// h rows), a reserve of fresh rows for day-to-day drift, and the cold tail.
// Each access draws one uniform number: below the cold probability it takes
// the next unused cold row, otherwise a Zipf rank of the hot set. Cold rows
// are never reused within a stream, so the distinct count is controlled.
class TraceGenerator final : public QueryStream {
 public:
  explicit TraceGenerator(const TraceSpec& spec);
  bool next(TraceEvent& out) override;
  std::uint32_t tables() const override { return spec_.preset.num_tables; }
  std::uint32_t lookups() const override { return spec_.preset.lookups_per_query; }
  const LocalityPlan& plan() const { return plan_; }
  // Hot rows of a table for the current day, hottest first.
  const std::vector<std::uint32_t>& hot_rows(std::uint32_t table) const { return tables_[table].hot; }

 private:
  struct Table {
    SeededPermutation perm;
    std::vector<std::uint32_t> hot;
    std::uint64_t fresh_used = 0;
    std::uint64_t cold_used = 0;
    std::uint64_t cold_offset = 0;
  };
  double uniform();
  void start_day(std::uint32_t day);

  TraceSpec spec_;
  LocalityPlan plan_;
  std::vector<double> cdf_;
  std::vector<Table> tables_;
  std::mt19937_64 rng_;
  std::uint64_t fresh_capacity_ = 0;
  std::uint64_t cold_capacity_ = 0;
  std::uint64_t emitted_ = 0;
  std::uint32_t day_ = 0;
  bool boundary_pending_ = false;
};

// Reads the text trace format (see docs/formats.md). Errors carry the line
// number and are raised while iterating.
class TraceReader final : public QueryStream {
 public:
  TraceReader(std::unique_ptr<std::istream> in, const DlrmPreset& preset, std::uint32_t rows_per_table);
  bool next(TraceEvent& out) override;
  std::uint32_t tables() const override { return preset_.num_tables; }
  std::uint32_t lookups() const override { return preset_.lookups_per_query; }

 private:
  std::unique_ptr<std::istream> in_;
  DlrmPreset preset_;
  std::uint32_t rows_;
  std::size_t line_no_ = 0;
  bool header_seen_ = false;
};

class TraceFormatError : public std::runtime_error {
 public:
  TraceFormatError(std::size_t line, const std::string& what)
      : std::runtime_error("trace line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

std::unique_ptr<TraceReader> load_trace(const std::string& path, const DlrmPreset& preset,
                                        std::uint32_t rows_per_table);
std::unique_ptr<TraceReader> parse_trace(std::string text, const DlrmPreset& preset, std::uint32_t rows_per_table);
// Writes header plus every event of the stream; returns the number of queries.
std::uint64_t write_trace(std::ostream& out, QueryStream& stream);

// Replays a fixed event list.
class VectorStream final : public QueryStream {
 public:
  VectorStream(std::vector<TraceEvent> events, std::uint32_t tables, std::uint32_t lookups)
      : events_(std::move(events)), tables_(tables), lookups_(lookups) {}
  bool next(TraceEvent& out) override {
    if (pos_ == events_.size()) return false;
    out = events_[pos_++];
    return true;
  }
  std::uint32_t tables() const override { return tables_; }
  std::uint32_t lookups() const override { return lookups_; }

 private:
  std::vector<TraceEvent> events_;
  std::uint32_t tables_, lookups_;
  std::size_t pos_ = 0;
};

std::vector<TraceEvent> collect(QueryStream& stream);

// Query-level Bernoulli sampling keyed on (seed, query index).
bool sample_keeps(std::uint64_t seed, std::uint64_t query_index, double rate);

// Keeps a seeded fraction of the queries; day boundaries always pass.
class DownsampledStream final : public QueryStream {
 public:
  DownsampledStream(QueryStream& inner, double rate, std::uint64_t seed);
  bool next(TraceEvent& out) override;
  std::uint32_t tables() const override { return inner_->tables(); }
  std::uint32_t lookups() const override { return inner_->lookups(); }

 private:
  QueryStream* inner_;
  double rate_;
  std::uint64_t seed_;
  std::uint64_t index_ = 0;
};

// Exact per-key counts over the (sampled) queries, sorted by key.
std::vector<KeyCount> profile_counts(QueryStream& stream, double sample_rate = 1.0, std::uint64_t seed = 0);
// Same, as a dense vector over the key space (saturating at 2^32 - 1).
std::vector<std::uint32_t> profile_dense(QueryStream& stream, const KeySpace& space, double sample_rate = 1.0,
                                         std::uint64_t seed = 0);

struct StreamStats {
  std::uint64_t queries = 0;
  std::uint64_t accesses = 0;
  std::vector<double> unique_rate_per_table;
};
// Distinct keys / accesses per table over the events of one stream.
StreamStats measure_stream(std::span<const TraceEvent> events, std::uint32_t tables);

}  // namespace recflash
