#include "recflash/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "recflash/kv_config.hpp"
#include "recflash/remap.hpp"

namespace recflash {

const std::vector<std::string>& sweep_policies() {
  static const std::vector<std::string> p = {"seq", "sel", "af", "af_pd", "recflash"};
  return p;
}

double resolve_unique_rate(std::string_view s) {
  if (!s.empty() && (s.front() == 'K' || s.front() == 'k')) {
    std::string n(s);
    n[0] = 'K';
    return locality_preset(n);
  }
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw std::invalid_argument("unique rate '" + std::string(s) + "' is neither a number nor a K preset");
  if (!(v > 0.0 && v <= 1.0)) throw std::invalid_argument("unique rate must lie in (0, 1]");
  return v;
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void ExperimentSpec::validate() const {
  if (presets.empty() || nands.empty() || policies.empty() || seeds.empty())
    throw std::invalid_argument("experiment needs at least one preset, nand, policy and seed");
  if (unique_rates.empty() && traces.empty()) throw std::invalid_argument("experiment needs a unique rate or a trace");
  for (const auto& p : presets) dlrm_preset(p);
  if (flash_config.empty())
    for (const auto& n : nands) parse_cell_type(n);
  for (const auto& p : policies)
    if (std::find(sweep_policies().begin(), sweep_policies().end(), p) == sweep_policies().end())
      throw std::invalid_argument("unknown policy '" + p + "' (valid: seq, sel, af, af_pd, recflash)");
  for (const auto& u : unique_rates) resolve_unique_rate(u);
  if (queries == 0) throw std::invalid_argument("queries must be positive");
  if (rows_per_table == 0) throw std::invalid_argument("rows_per_table must be positive");
  if (!(profile_fraction > 0.0 && profile_fraction <= 1.0)) throw std::invalid_argument("profile_fraction must lie in (0, 1]");
  if (!(hot_fraction > 0.0 && hot_fraction <= 1.0)) throw std::invalid_argument("hot_fraction must lie in (0, 1]");
  if (!(downsample > 0.0 && downsample <= 1.0)) throw std::invalid_argument("downsample must lie in (0, 1]");
  if (!(cache_hit_latency_us >= 0.0)) throw std::invalid_argument("cache_hit_latency_us must be non-negative");
  if (!(drift >= 0.0 && drift <= 1.0)) throw std::invalid_argument("drift must lie in [0, 1]");
  if (hot_keys == 0) throw std::invalid_argument("hot_keys must be positive");
  if (jobs == 0) throw std::invalid_argument("jobs must be at least 1");
  if (sim_queries_per_day == 0) throw std::invalid_argument("sim_queries_per_day must be positive");
  trigger.validate();
}

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
  return out;
}

template <typename T>
std::string join_num(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
  return out;
}

std::vector<std::uint64_t> uint_list(const KvEntry& e) {
  std::vector<std::uint64_t> out;
  for (const auto& item : kv_list(e)) out.push_back(kv_uint({e.key, item, e.line}));
  return out;
}

bool kv_bool(const KvEntry& e) {
  if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no") return false;
  throw ConfigError(e.line, "'" + e.key + "' expects true or false, got '" + e.value + "'");
}

struct Field {
  const char* key;
  std::function<std::string(const ExperimentSpec&)> get;
  std::function<void(ExperimentSpec&, const KvEntry&)> set;
};

const std::vector<Field>& fields() {
  using S = ExperimentSpec;
  using E = KvEntry;
  static const std::vector<Field> f = {
      {"presets", [](const S& s) { return join(s.presets); }, [](S& s, const E& e) { s.presets = kv_list(e); }},
      {"nands", [](const S& s) { return join(s.nands); }, [](S& s, const E& e) { s.nands = kv_list(e); }},
      {"policies", [](const S& s) { return join(s.policies); }, [](S& s, const E& e) { s.policies = kv_list(e); }},
      {"unique_rates", [](const S& s) { return join(s.unique_rates); },
       [](S& s, const E& e) { s.unique_rates = kv_list(e); }},
      {"traces", [](const S& s) { return join(s.traces); },
       [](S& s, const E& e) { s.traces = e.value.empty() ? std::vector<std::string>{} : kv_list(e); }},
      {"seeds", [](const S& s) { return join_num(s.seeds); }, [](S& s, const E& e) { s.seeds = uint_list(e); }},
      {"queries", [](const S& s) { return std::to_string(s.queries); },
       [](S& s, const E& e) { s.queries = kv_uint(e); }},
      {"rows_per_table", [](const S& s) { return std::to_string(s.rows_per_table); },
       [](S& s, const E& e) {
         auto v = kv_uint(e);
         if (v > 0xffffffffULL) throw ConfigError(e.line, "rows_per_table is out of range");
         s.rows_per_table = static_cast<std::uint32_t>(v);
       }},
      {"profile_fraction", [](const S& s) { return format_double(s.profile_fraction); },
       [](S& s, const E& e) { s.profile_fraction = kv_double(e); }},
      {"hot_fraction", [](const S& s) { return format_double(s.hot_fraction); },
       [](S& s, const E& e) { s.hot_fraction = kv_double(e); }},
      {"hot_keys", [](const S& s) { return std::to_string(s.hot_keys); },
       [](S& s, const E& e) { s.hot_keys = static_cast<std::uint32_t>(std::min<std::uint64_t>(kv_uint(e), 0xffffffffULL)); }},
      {"zipf_exponent", [](const S& s) { return format_double(s.zipf_exponent); },
       [](S& s, const E& e) { s.zipf_exponent = kv_double(e); }},
      {"page_cache_bytes", [](const S& s) { return std::to_string(s.page_cache_bytes); },
       [](S& s, const E& e) { s.page_cache_bytes = kv_uint(e); }},
      {"cache_hit_latency_us", [](const S& s) { return format_double(s.cache_hit_latency_us); },
       [](S& s, const E& e) { s.cache_hit_latency_us = kv_double(e); }},
      {"vector_cache_per_table", [](const S& s) { return std::to_string(s.vector_cache_per_table); },
       [](S& s, const E& e) { s.vector_cache_per_table = kv_uint(e); }},
      {"pipelined", [](const S& s) { return std::string(s.pipelined ? "true" : "false"); },
       [](S& s, const E& e) { s.pipelined = kv_bool(e); }},
      {"downsample", [](const S& s) { return format_double(s.downsample); },
       [](S& s, const E& e) { s.downsample = kv_double(e); }},
      {"layout_seed", [](const S& s) { return std::to_string(s.layout_seed); },
       [](S& s, const E& e) { s.layout_seed = kv_uint(e); }},
      {"flash_config", [](const S& s) { return s.flash_config; }, [](S& s, const E& e) { s.flash_config = e.value; }},
      {"mlp_rmc1_us", [](const S& s) { return format_double(s.mlp.rmc1_us); },
       [](S& s, const E& e) { s.mlp.rmc1_us = kv_double(e); }},
      {"mlp_rmc2_us", [](const S& s) { return format_double(s.mlp.rmc2_us); },
       [](S& s, const E& e) { s.mlp.rmc2_us = kv_double(e); }},
      {"mlp_rmc3_us", [](const S& s) { return format_double(s.mlp.rmc3_us); },
       [](S& s, const E& e) { s.mlp.rmc3_us = kv_double(e); }},
      {"trigger", [](const S& s) { return s.trigger.to_string(); },
       [](S& s, const E& e) {
         try {
           s.trigger = TriggerPolicy::parse(e.value);
         } catch (const std::invalid_argument& ex) {
           throw ConfigError(e.line, ex.what());
         }
       }},
      {"days", [](const S& s) { return std::to_string(s.days); },
       [](S& s, const E& e) { s.days = static_cast<std::uint32_t>(std::min<std::uint64_t>(kv_uint(e), 100000)); }},
      {"sim_queries_per_day", [](const S& s) { return std::to_string(s.sim_queries_per_day); },
       [](S& s, const E& e) { s.sim_queries_per_day = kv_uint(e); }},
      {"daily_inferences", [](const S& s) { return join_num(s.daily_inferences); },
       [](S& s, const E& e) { s.daily_inferences = uint_list(e); }},
      {"drift", [](const S& s) { return format_double(s.drift); }, [](S& s, const E& e) { s.drift = kv_double(e); }},
      {"out", [](const S& s) { return s.out_dir; }, [](S& s, const E& e) { s.out_dir = e.value; }},
      {"jobs", [](const S& s) { return std::to_string(s.jobs); },
       [](S& s, const E& e) { s.jobs = static_cast<unsigned>(std::min<std::uint64_t>(kv_uint(e), 1024)); }},
  };
  return f;
}

}  // namespace

ExperimentSpec parse_experiment(std::string_view text) {
  ExperimentSpec spec;
  const auto entries = parse_kv(text);
  for (const auto& e : entries) {
    auto it = std::find_if(fields().begin(), fields().end(), [&](const Field& f) { return e.key == f.key; });
    if (it == fields().end()) throw ConfigError(e.line, "unknown key '" + e.key + "'");
    it->set(spec, e);
  }
  // Field-level checks again, now with the offending line attached.
  for (const auto& e : entries) {
    try {
      if (e.key == "presets")
        for (const auto& p : spec.presets) dlrm_preset(p);
      if (e.key == "nands")
        for (const auto& n : spec.nands) parse_cell_type(n);
      if (e.key == "unique_rates")
        for (const auto& u : spec.unique_rates) resolve_unique_rate(u);
      if (e.key == "policies")
        for (const auto& p : spec.policies)
          if (std::find(sweep_policies().begin(), sweep_policies().end(), p) == sweep_policies().end())
            throw std::invalid_argument("unknown policy '" + p + "' (valid: seq, sel, af, af_pd, recflash)");
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(e.line, ex.what());
    }
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& ex) {
    // range messages start with the field name; point at its line when set
    const std::string_view msg = ex.what();
    std::size_t line = 0;
    for (const auto& e : entries)
      if (msg.starts_with(e.key + " ")) line = e.line;
    throw ConfigError(line, ex.what());
  }
  return spec;
}

ExperimentSpec load_experiment(const std::string& path) { return parse_experiment(read_text_file(path)); }

std::string describe(const ExperimentSpec& spec) {
  std::string out = "# recflash experiment v1\n";
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(spec) + "\n";
  return out;
}

std::string normalization_baseline(const ExperimentSpec& spec) {
  if (std::find(spec.policies.begin(), spec.policies.end(), "sel") != spec.policies.end()) return "sel";
  return spec.policies.front();
}

namespace {

struct Cell {
  std::string preset;
  std::string nand;
  std::string trace;  // path, or the unique-rate token
  bool generated = true;
  std::uint64_t seed = 0;
};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct PolicyRun {
  std::string name;
  std::unique_ptr<Engine> engine;
};

// Settings that cannot change a result stay out of the hash.
std::string hash_basis(const ExperimentSpec& spec) {
  ExperimentSpec s = spec;
  s.jobs = 1;
  s.out_dir.clear();
  return describe(s);
}

std::vector<SweepRow> run_cell(const ExperimentSpec& spec, const Cell& cell, const std::string& base_hash_text) {
  const auto preset = dlrm_preset(cell.preset);
  const FlashConfig flash = spec.flash_config.empty() ? flash_preset(cell.nand) : load_flash_config(spec.flash_config);
  const SlotGeometry geo(flash, preset.vector_bytes());
  const KeySpace space(preset.num_tables, spec.rows_per_table);

  TraceSpec ts;
  ts.preset = preset;
  ts.rows_per_table = spec.rows_per_table;
  ts.seed = cell.seed;
  ts.hot_keys = spec.hot_keys;
  ts.zipf_exponent = spec.zipf_exponent;
  ts.drift = spec.drift;
  double rate = 0.0;
  if (cell.generated) {
    rate = resolve_unique_rate(cell.trace);
    ts.unique_rate = rate;
    ts.num_queries = spec.queries;
    plan_locality(ts);  // reject infeasible cells before any heavy work
  }

  auto uses = [&](const char* p) {
    return std::find(spec.policies.begin(), spec.policies.end(), p) != spec.policies.end();
  };
  const bool need_baseline = uses("seq") || uses("sel");
  const bool need_af = uses("af");
  const bool need_af_pd = uses("af_pd") || uses("recflash");

  std::optional<BaselineMapping> baseline;
  std::optional<ManagedLayout> af, af_pd;
  if (need_baseline) baseline.emplace(geo, space, spec.layout_seed);
  if (need_af || need_af_pd) {
    std::vector<std::uint32_t> dense;
    if (cell.generated) {
      TraceSpec pt = ts;
      pt.stream = 1;
      pt.num_queries = std::max<std::uint64_t>(
          1, static_cast<std::uint64_t>(std::ceil(spec.profile_fraction * double(spec.queries))));
      pt.unique_rate = rate;
      TraceGenerator g(pt);
      dense = profile_dense(g, space);
    } else {
      auto r = load_trace(cell.trace, preset, spec.rows_per_table);
      dense = profile_dense(*r, space, spec.profile_fraction, cell.seed);
    }
    auto table = FrequencyTable::build_from_dense_counts(space, dense, spec.hot_fraction);
    dense = {};
    if (need_af && need_af_pd) {
      af.emplace(table, geo, LayoutKind::AF);
      af_pd.emplace(std::move(table), geo, LayoutKind::AF_PD);
    } else if (need_af) {
      af.emplace(std::move(table), geo, LayoutKind::AF);
    } else {
      af_pd.emplace(std::move(table), geo, LayoutKind::AF_PD);
    }
  }

  std::vector<PolicyRun> runs;
  for (const auto& p : spec.policies) {
    EngineOptions o;
    o.pipelined = spec.pipelined;
    o.page_cache_bytes = spec.page_cache_bytes;
    o.cache_hit_latency_us = spec.cache_hit_latency_us;
    o.vector_cache_per_table = spec.vector_cache_per_table;
    const AddressResolver* layout = nullptr;
    if (p == "seq" || p == "sel") {
      o.policy = p == "seq" ? PolicyKind::SeqDataOut : PolicyKind::SelDataOut;
      layout = &*baseline;
    } else if (p == "af") {
      o.policy = PolicyKind::SelDataOut;
      layout = &*af;
    } else if (p == "af_pd") {
      o.policy = PolicyKind::SelDataOut;
      layout = &*af_pd;
    } else {
      o.policy = PolicyKind::RecFlash;
      layout = &*af_pd;
    }
    runs.push_back({p, std::make_unique<Engine>(flash, *layout, o, spec.mlp, &preset)});
  }

  std::unique_ptr<QueryStream> source;
  if (cell.generated) {
    ts.stream = 0;
    source = std::make_unique<TraceGenerator>(ts);
  } else {
    source = load_trace(cell.trace, preset, spec.rows_per_table);
  }
  std::optional<DownsampledStream> sampled;
  QueryStream* stream = source.get();
  if (spec.downsample < 1.0) stream = &sampled.emplace(*source, spec.downsample, cell.seed);
  TraceEvent ev;
  std::uint32_t days = 0;
  while (stream->next(ev)) {
    if (ev.kind == TraceEvent::Kind::DayBoundary) {
      ++days;
      continue;
    }
    for (auto& r : runs) r.engine->serve_query(ev.query);
  }

  std::vector<SweepRow> rows;
  for (auto& r : runs) {
    SweepRow row;
    row.preset = preset.name;
    row.nand = spec.flash_config.empty() ? std::string(to_string(parse_cell_type(cell.nand))) : cell.nand;
    row.trace = cell.trace;
    row.unique_rate = rate;
    row.seed = cell.seed;
    row.policy = r.name;
    row.report = r.engine->report();
    row.report.cumulative_days = days;
    row.mlp_us = spec.mlp.cost_us(preset);
    row.config_hash = hex64(fnv1a64(base_hash_text + serialize_flash_config(flash) + "preset = " + cell.preset +
                                    "\ntrace = " + cell.trace + "\nseed = " + std::to_string(cell.seed) +
                                    "\npolicy = " + r.name + "\n"));
    rows.push_back(std::move(row));
  }
  return rows;
}

void normalize(std::vector<SweepRow>& rows, const std::string& base) {
  const SweepRow* b = nullptr;
  for (const auto& r : rows)
    if (r.policy == base && r.status == "ok") b = &r;
  auto ratio = [](double x, double y) { return y > 0 ? x / y : 0.0; };
  for (auto& r : rows) {
    if (!b || r.status != "ok") continue;
    r.norm_embedding = ratio(r.report.embedding_latency_us, b->report.embedding_latency_us);
    r.norm_end_to_end = ratio(r.report.end_to_end_latency_us, b->report.end_to_end_latency_us);
    r.norm_energy = ratio(r.report.read_energy_uj, b->report.read_energy_uj);
    r.norm_page_reads = ratio(double(r.report.page_reads), double(b->report.page_reads));
  }
}

}  // namespace

SweepResult run_sweep(const ExperimentSpec& spec, const std::function<void(const std::string&)>& log) {
  spec.validate();
  std::vector<Cell> cells;
  const std::vector<std::string> nands =
      spec.flash_config.empty() ? spec.nands : std::vector<std::string>{"custom"};
  for (const auto& p : spec.presets)
    for (const auto& n : nands) {
      if (spec.traces.empty()) {
        for (const auto& u : spec.unique_rates)
          for (auto s : spec.seeds) cells.push_back({p, n, u, true, s});
      } else {
        for (const auto& t : spec.traces)
          for (auto s : spec.seeds) cells.push_back({p, n, t, false, s});
      }
    }

  const auto hash_text = hash_basis(spec);
  const auto base = normalization_baseline(spec);
  std::vector<std::vector<SweepRow>> out(cells.size());
  std::vector<char> failed(cells.size(), 0);
  std::mutex log_mu;
  std::size_t next = 0;
  std::mutex next_mu;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lk(next_mu);
        if (next == cells.size()) return;
        i = next++;
      }
      const auto& c = cells[i];
      const std::string label = c.preset + "/" + c.nand + "/" + c.trace + "/seed" + std::to_string(c.seed);
      try {
        out[i] = run_cell(spec, c, hash_text);
        normalize(out[i], base);
        if (log) {
          std::lock_guard lk(log_mu);
          log("done " + label);
        }
      } catch (const std::exception& ex) {
        failed[i] = 1;
        out[i].clear();
        for (const auto& p : spec.policies) {
          SweepRow row;
          row.preset = c.preset;
          row.nand = c.nand;
          row.trace = c.trace;
          row.seed = c.seed;
          row.policy = p;
          row.status = std::string("error: ") + ex.what();
          row.config_hash = hex64(fnv1a64(hash_text + label + p));
          out[i].push_back(std::move(row));
        }
        if (log) {
          std::lock_guard lk(log_mu);
          log("failed " + label + ": " + ex.what());
        }
      }
    }
  };
  const unsigned jobs = std::min<std::size_t>(spec.jobs, std::max<std::size_t>(cells.size(), 1));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  SweepResult result;
  result.cells = cells.size();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    result.failed_cells += failed[i];
    for (auto& r : out[i]) result.rows.push_back(std::move(r));
  }
  return result;
}

namespace {

const char* kCsvHeader =
    "preset,nand,trace,unique_rate,seed,policy,status,queries,embedding_latency_us,mean_embedding_latency_us,"
    "end_to_end_latency_us,mlp_us,read_energy_uj,page_reads,cache_hits,cache_misses,vector_cache_hits,"
    "bytes_fetched_useful,bytes_fetched_total,page_utilization,norm_embedding_latency,norm_end_to_end_latency,"
    "norm_read_energy,norm_page_reads,config_hash";

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

void write_csv(std::ostream& out, const SweepResult& result) {
  out << kCsvHeader << '\n';
  for (const auto& r : result.rows) {
    const auto& p = r.report;
    out << csv_field(r.preset) << ',' << csv_field(r.nand) << ',' << csv_field(r.trace) << ','
        << format_double(r.unique_rate) << ',' << r.seed << ',' << r.policy << ',' << csv_field(r.status) << ','
        << p.queries << ',' << format_double(p.embedding_latency_us) << ','
        << format_double(p.mean_embedding_latency_us()) << ',' << format_double(p.end_to_end_latency_us) << ','
        << format_double(r.mlp_us) << ',' << format_double(p.read_energy_uj) << ',' << p.page_reads << ','
        << p.cache_hits << ',' << p.cache_misses << ',' << p.vector_cache_hits << ',' << p.bytes_fetched_useful
        << ',' << p.bytes_fetched_total << ',' << format_double(p.page_utilization()) << ','
        << format_double(r.norm_embedding) << ',' << format_double(r.norm_end_to_end) << ','
        << format_double(r.norm_energy) << ',' << format_double(r.norm_page_reads) << ',' << r.config_hash << '\n';
  }
}

void write_json(std::ostream& out, const ExperimentSpec& spec, const SweepResult& result) {
  nlohmann::json j;
  j["schema"] = "recflash-results-v1";
  j["config_hash"] = hex64(fnv1a64(hash_basis(spec)));
  j["normalization_baseline"] = normalization_baseline(spec);
  j["cells"] = result.cells;
  j["failed_cells"] = result.failed_cells;
  auto rows = nlohmann::json::array();
  for (const auto& r : result.rows) {
    const auto& p = r.report;
    rows.push_back({{"preset", r.preset},
                    {"nand", r.nand},
                    {"trace", r.trace},
                    {"unique_rate", r.unique_rate},
                    {"seed", r.seed},
                    {"policy", r.policy},
                    {"status", r.status},
                    {"queries", p.queries},
                    {"embedding_latency_us", p.embedding_latency_us},
                    {"end_to_end_latency_us", p.end_to_end_latency_us},
                    {"mlp_us", r.mlp_us},
                    {"read_energy_uj", p.read_energy_uj},
                    {"page_reads", p.page_reads},
                    {"cache_hits", p.cache_hits},
                    {"cache_misses", p.cache_misses},
                    {"cache_flushes", p.cache_flushes},
                    {"vector_cache_hits", p.vector_cache_hits},
                    {"bytes_fetched_useful", p.bytes_fetched_useful},
                    {"bytes_fetched_total", p.bytes_fetched_total},
                    {"page_utilization", p.page_utilization()},
                    {"norm_embedding_latency", r.norm_embedding},
                    {"norm_end_to_end_latency", r.norm_end_to_end},
                    {"norm_read_energy", r.norm_energy},
                    {"norm_page_reads", r.norm_page_reads},
                    {"cumulative_days", p.cumulative_days},
                    {"config_hash", r.config_hash}});
  }
  j["rows"] = std::move(rows);
  out << j.dump(2) << '\n';
}

void write_results(const ExperimentSpec& spec, const SweepResult& result) {
  std::filesystem::create_directories(spec.out_dir);
  const std::filesystem::path dir(spec.out_dir);
  std::ofstream csv(dir / "results.csv", std::ios::binary | std::ios::trunc);
  std::ofstream json(dir / "results.json", std::ios::binary | std::ios::trunc);
  if (!csv || !json) throw std::runtime_error("cannot write results into '" + spec.out_dir + "'");
  write_csv(csv, result);
  write_json(json, spec, result);
}

TimelineSpec timeline_spec(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.unique_rates.empty()) throw std::invalid_argument("the timeline needs a generated workload (unique_rates)");
  TimelineSpec t;
  t.trace.preset = dlrm_preset(spec.presets.front());
  t.trace.rows_per_table = spec.rows_per_table;
  t.trace.unique_rate = resolve_unique_rate(spec.unique_rates.front());
  t.trace.seed = spec.seeds.front();
  t.trace.hot_keys = spec.hot_keys;
  t.trace.zipf_exponent = spec.zipf_exponent;
  t.trace.drift = spec.drift;
  t.flash = spec.flash_config.empty() ? flash_preset(spec.nands.front()) : load_flash_config(spec.flash_config);
  t.trigger = spec.trigger;
  t.days = spec.days;
  t.sim_queries_per_day = spec.sim_queries_per_day;
  t.daily_inferences = spec.daily_inferences;
  t.hot_fraction = spec.hot_fraction;
  t.layout_seed = spec.layout_seed;
  t.page_cache_bytes = spec.page_cache_bytes;
  return t;
}

void write_timeline_csv(std::ostream& out, const TimelineReport& report) {
  out << "daily_inferences,day,baseline_cumulative_us,recflash_cumulative_us,remap_overhead_us,triggered\n";
  for (const auto& c : report.curves) {
    for (std::size_t i = 0; i < report.days.size(); ++i) {
      out << c.daily_inferences << ',' << report.days[i].day << ',' << format_double(c.baseline_cumulative_us[i])
          << ',' << format_double(c.recflash_cumulative_us[i]) << ',' << format_double(c.remap_overhead_us[i]) << ','
          << (report.days[i].triggered ? 1 : 0) << '\n';
    }
  }
}

void write_timeline_json(std::ostream& out, const TimelineSpec& spec, const TimelineReport& report) {
  nlohmann::json j;
  j["schema"] = "recflash-timeline-v1";
  j["days"] = spec.days;
  j["trigger"] = spec.trigger.to_string();
  j["sim_queries_per_day"] = spec.sim_queries_per_day;
  auto days = nlohmann::json::array();
  for (const auto& d : report.days)
    days.push_back({{"day", d.day},
                    {"baseline_us", d.baseline_us},
                    {"recflash_us", d.recflash_us},
                    {"degraded_us", d.degraded_us},
                    {"baseline_energy_uj", d.baseline_energy_uj},
                    {"recflash_energy_uj", d.recflash_energy_uj},
                    {"remap_in_flight", d.remap_in_flight},
                    {"remap_overhead_us", d.remap_overhead_us},
                    {"triggered", d.triggered}});
  j["per_day"] = std::move(days);
  auto events = nlohmann::json::array();
  for (const auto& e : report.recflash.remap_events)
    events.push_back({{"day", e.day},
                      {"pages_moved", e.pages_moved},
                      {"blocks_erased", e.blocks_erased},
                      {"keys_moved", e.keys_moved},
                      {"latency_us", e.latency_us},
                      {"energy_uj", e.energy_uj},
                      {"update_logic_us", e.update_logic_us}});
  j["remap_events"] = std::move(events);
  auto curves = nlohmann::json::array();
  for (const auto& c : report.curves)
    curves.push_back({{"daily_inferences", c.daily_inferences},
                      {"baseline_cumulative_us", c.baseline_cumulative_us},
                      {"recflash_cumulative_us", c.recflash_cumulative_us},
                      {"remap_overhead_us", c.remap_overhead_us}});
  j["curves"] = std::move(curves);
  out << j.dump(2) << '\n';
}

}  // namespace recflash
