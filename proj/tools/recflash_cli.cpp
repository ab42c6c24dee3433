// recflash: sweep, timeline and trace-generation driver.
//
// Exit codes: 0 success, 2 bad configuration or arguments, 1 run failure
// (including sweeps where any cell failed).

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "recflash/experiment.hpp"
#include "recflash/kv_config.hpp"
#include "recflash/timeline.hpp"
#include "recflash/workload.hpp"

using namespace recflash;

namespace {

struct Overrides {
  std::string config;
  std::string out;
  std::vector<std::uint64_t> seeds;
  unsigned jobs = 0;
  std::vector<std::string> policies;
  std::vector<std::string> nands;
  std::vector<std::string> presets;
  std::vector<std::string> traces;
  std::vector<std::string> rates;
  std::string trigger;
  double downsample = 0.0;
  std::uint64_t queries = 0;
  std::uint32_t days = 0;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config,-c", o.config, "experiment file (key = value)")->check(CLI::ExistingFile);
  sub->add_option("--out,-o", o.out, "output directory");
  sub->add_option("--seeds", o.seeds, "seed list (default: RECFLASH_SEED or 1)")->delimiter(',');
  sub->add_option("--jobs,-j", o.jobs, "parallel cells");
  sub->add_option("--policy", o.policies, "seq, sel, af, af_pd, recflash")->delimiter(',');
  sub->add_option("--nand", o.nands, "slc, tlc, qlc")->delimiter(',');
  sub->add_option("--preset", o.presets, "rmc1, rmc2, rmc3")->delimiter(',');
  sub->add_option("--trace", o.traces, "trace files instead of generated workloads")->delimiter(',');
  sub->add_option("--gen", o.rates, "generated unique rates (K0..K2 or a number)")->delimiter(',');
  sub->add_option("--trigger", o.trigger, "daily | periodic[:N] | threshold[:x[:p]]");
  sub->add_option("--downsample", o.downsample, "query sampling rate in (0, 1]");
  sub->add_option("--queries", o.queries, "queries per cell");
  sub->add_option("--days", o.days, "timeline days");
}

ExperimentSpec resolve(const Overrides& o) {
  ExperimentSpec s = o.config.empty() ? ExperimentSpec{} : load_experiment(o.config);
  // --seeds beats RECFLASH_SEED, which beats the file.
  if (const char* env = std::getenv("RECFLASH_SEED"); env && o.seeds.empty()) {
    try {
      s.seeds = {std::stoull(env)};
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("RECFLASH_SEED is not an integer: ") + env);
    }
  }
  if (!o.seeds.empty()) s.seeds = o.seeds;
  if (!o.out.empty()) s.out_dir = o.out;
  if (o.jobs) s.jobs = o.jobs;
  if (!o.policies.empty()) s.policies = o.policies;
  if (!o.nands.empty()) s.nands = o.nands;
  if (!o.presets.empty()) s.presets = o.presets;
  if (!o.traces.empty()) s.traces = o.traces;
  if (!o.rates.empty()) {
    s.unique_rates = o.rates;
    s.traces.clear();
  }
  if (!o.trigger.empty()) s.trigger = TriggerPolicy::parse(o.trigger);
  if (o.downsample > 0) s.downsample = o.downsample;
  if (o.queries) s.queries = o.queries;
  if (o.days) s.days = o.days;
  s.validate();
  return s;
}

int cmd_run(const ExperimentSpec& spec) {
  std::cerr << "running " << spec.presets.size() * spec.nands.size() *
                                 (spec.traces.empty() ? spec.unique_rates.size() : spec.traces.size()) *
                                 spec.seeds.size()
            << " cell(s)\n";
  auto result = run_sweep(spec, [](const std::string& msg) { std::cerr << msg << '\n'; });
  write_results(spec, result);
  for (const auto& r : result.rows) {
    if (r.status != "ok") continue;
    std::cout << r.preset << ' ' << r.nand << ' ' << r.trace << " seed=" << r.seed << ' ' << r.policy
              << " embed_us/query=" << format_double(r.report.mean_embedding_latency_us())
              << " norm=" << format_double(r.norm_embedding) << '\n';
  }
  std::cerr << "wrote " << spec.out_dir << "/results.csv and results.json\n";
  if (result.failed_cells) {
    std::cerr << result.failed_cells << " of " << result.cells << " cell(s) failed\n";
    return 1;
  }
  return 0;
}

int cmd_timeline(const ExperimentSpec& spec) {
  const auto ts = timeline_spec(spec);
  const auto rep = run_timeline(ts);
  std::filesystem::create_directories(spec.out_dir);
  std::ofstream csv(std::filesystem::path(spec.out_dir) / "timeline.csv");
  std::ofstream json(std::filesystem::path(spec.out_dir) / "timeline.json");
  if (!csv || !json) throw std::runtime_error("cannot write into '" + spec.out_dir + "'");
  write_timeline_csv(csv, rep);
  write_timeline_json(json, ts, rep);
  std::cout << "remaps: " << rep.recflash.remap_events.size() << '\n';
  for (const auto& c : rep.curves) {
    std::cout << "daily=" << c.daily_inferences << " baseline_s=" << format_double(c.baseline_cumulative_us.back() / 1e6)
              << " recflash_s=" << format_double(c.recflash_cumulative_us.back() / 1e6) << '\n';
  }
  return 0;
}

int cmd_gen_trace(const ExperimentSpec& spec, const std::string& path) {
  TraceSpec ts;
  ts.preset = dlrm_preset(spec.presets.front());
  ts.rows_per_table = spec.rows_per_table;
  ts.unique_rate = resolve_unique_rate(spec.unique_rates.front());
  ts.num_queries = spec.queries;
  ts.seed = spec.seeds.front();
  ts.hot_keys = spec.hot_keys;
  ts.zipf_exponent = spec.zipf_exponent;
  ts.drift = spec.drift;
  ts.days = spec.days > 1 && spec.days <= spec.queries ? spec.days : 1;
  TraceGenerator gen(ts);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "'");
  const auto n = write_trace(out, gen);
  std::cerr << "wrote " << n << " queries to " << path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Embedding lookup simulator for SSD-resident recommendation tables"};
  app.require_subcommand(1);
  Overrides o;
  auto* run = app.add_subcommand("run", "run a policy sweep and write results.csv / results.json");
  add_common(run, o);
  auto* validate = app.add_subcommand("validate-config", "check an experiment file and print the resolved values");
  add_common(validate, o);
  auto* timeline = app.add_subcommand("timeline", "multi-day run with remapping triggers");
  add_common(timeline, o);
  auto* gen = app.add_subcommand("gen-trace", "write a generated trace file");
  add_common(gen, o);
  std::string trace_out;
  gen->add_option("--file,-f", trace_out, "output trace path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  ExperimentSpec spec;
  try {
    spec = resolve(o);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*validate) {
      std::cout << describe(spec);
      return 0;
    }
    if (*run) return cmd_run(spec);
    if (*timeline) return cmd_timeline(spec);
    if (*gen) return cmd_gen_trace(spec, trace_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
