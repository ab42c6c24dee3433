#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "recflash/engine.hpp"
#include "recflash/flash_model.hpp"
#include "recflash/timeline.hpp"
#include "recflash/workload.hpp"

namespace recflash {

// Policies a sweep can run. "seq" and "sel" read the scattered baseline
// layout; "af" and "af_pd" use selective data-out on the frequency layouts;
// "recflash" adds the page cache to af_pd.
const std::vector<std::string>& sweep_policies();

struct ExperimentSpec {
  std::vector<std::string> presets = {"rmc2"};
  std::vector<std::string> nands = {"tlc"};
  std::vector<std::string> policies = {"seq", "sel", "recflash"};
  std::vector<std::string> unique_rates = {"K0"};  // preset names or numbers
  std::vector<std::string> traces;                 // trace files; replaces generation
  std::vector<std::uint64_t> seeds = {1};
  std::uint64_t queries = 10'000;
  std::uint32_t rows_per_table = 1'000'000;
  double profile_fraction = 0.1;
  double hot_fraction = 0.1;
  std::uint32_t hot_keys = 1024;
  double zipf_exponent = 1.0;
  std::uint64_t page_cache_bytes = PageCache::kDefaultCapacityBytes;
  double cache_hit_latency_us = 0.0;
  std::uint64_t vector_cache_per_table = 0;
  bool pipelined = false;
  double downsample = 1.0;
  std::uint64_t layout_seed = 7;
  std::string flash_config;  // optional file replacing the named NAND rows
  MlpCostModel mlp = MlpCostModel::defaults();
  TriggerPolicy trigger{};
  std::uint32_t days = 35;
  std::uint64_t sim_queries_per_day = 1000;
  std::vector<std::uint64_t> daily_inferences = {200'000, 1'000'000, 5'000'000, 20'000'000};
  double drift = 0.1;
  std::string out_dir = "results";
  unsigned jobs = 1;

  void validate() const;
};

// Key/value experiment file; unknown keys and malformed values raise
// ConfigError with the line number.
ExperimentSpec parse_experiment(std::string_view text);
ExperimentSpec load_experiment(const std::string& path);
// Every resolved field in canonical key = value form.
std::string describe(const ExperimentSpec& spec);

double resolve_unique_rate(std::string_view name_or_value);
std::uint64_t fnv1a64(std::string_view data);

struct SweepRow {
  std::string preset;
  std::string nand;
  std::string trace;
  double unique_rate = 0.0;  // 0 for trace files
  std::uint64_t seed = 0;
  std::string policy;
  SimReport report;
  double mlp_us = 0.0;
  std::string status = "ok";
  std::string config_hash;
  // Ratios against the baseline row of the same cell.
  double norm_embedding = 0.0;
  double norm_end_to_end = 0.0;
  double norm_energy = 0.0;
  double norm_page_reads = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t cells = 0;
  std::size_t failed_cells = 0;
};

// Runs every (preset, nand, trace, seed) cell; each cell generates its
// trace once and feeds every policy. Cell failures are recorded in the
// rows' status and do not stop the sweep.
SweepResult run_sweep(const ExperimentSpec& spec, const std::function<void(const std::string&)>& log = {});

// Baseline of normalisation: "sel" when present, else the first policy.
std::string normalization_baseline(const ExperimentSpec& spec);

void write_csv(std::ostream& out, const SweepResult& result);
void write_json(std::ostream& out, const ExperimentSpec& spec, const SweepResult& result);
// Writes results.csv and results.json into spec.out_dir (created if needed).
void write_results(const ExperimentSpec& spec, const SweepResult& result);

// Timeline for the first preset/nand/rate/seed of the spec.
TimelineSpec timeline_spec(const ExperimentSpec& spec);
void write_timeline_csv(std::ostream& out, const TimelineReport& report);
void write_timeline_json(std::ostream& out, const TimelineSpec& spec, const TimelineReport& report);

}  // namespace recflash
