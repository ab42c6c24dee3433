#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "recflash/cache.hpp"
#include "recflash/experiment.hpp"
#include "recflash/flash_model.hpp"
#include "recflash/kv_config.hpp"
#include "recflash/mapping_table.hpp"
#include "recflash/timeline.hpp"
#include "recflash/workload.hpp"

namespace py = pybind11;
using namespace recflash;

namespace {

using KeyTuple = std::pair<std::uint32_t, std::uint32_t>;

VectorKey to_key(const KeyTuple& k) { return {k.first, k.second}; }
KeyTuple from_key(const VectorKey& k) { return {k.table, k.row}; }

std::vector<KeyTuple> from_keys(const std::vector<VectorKey>& ks) {
  std::vector<KeyTuple> out;
  out.reserve(ks.size());
  for (const auto& k : ks) out.push_back(from_key(k));
  return out;
}

std::vector<KeyCount> to_counts(const std::vector<std::pair<KeyTuple, std::uint64_t>>& in) {
  std::vector<KeyCount> out;
  out.reserve(in.size());
  for (const auto& [k, c] : in) out.push_back({to_key(k), c});
  return out;
}

py::dict row_dict(const SweepRow& r) {
  py::dict d;
  d["preset"] = r.preset;
  d["nand"] = r.nand;
  d["trace"] = r.trace;
  d["unique_rate"] = r.unique_rate;
  d["seed"] = r.seed;
  d["policy"] = r.policy;
  d["status"] = r.status;
  d["queries"] = r.report.queries;
  d["embedding_latency_us"] = r.report.embedding_latency_us;
  d["mean_embedding_latency_us"] = r.report.mean_embedding_latency_us();
  d["end_to_end_latency_us"] = r.report.end_to_end_latency_us;
  d["read_energy_uj"] = r.report.read_energy_uj;
  d["page_reads"] = r.report.page_reads;
  d["cache_hits"] = r.report.cache_hits;
  d["page_utilization"] = r.report.page_utilization();
  d["norm_embedding_latency"] = r.norm_embedding;
  d["norm_read_energy"] = r.norm_energy;
  d["config_hash"] = r.config_hash;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Flash-resident embedding lookup simulator";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<TimingParams>(m, "TimingParams")
      .def(py::init<>())
      .def_readwrite("t_alh", &TimingParams::t_alh)
      .def_readwrite("t_als", &TimingParams::t_als)
      .def_readwrite("t_ds", &TimingParams::t_ds)
      .def_readwrite("t_wc", &TimingParams::t_wc)
      .def_readwrite("t_r", &TimingParams::t_r)
      .def_readwrite("t_rr", &TimingParams::t_rr)
      .def_readwrite("t_rc", &TimingParams::t_rc)
      .def("validate", &TimingParams::validate);

  py::class_<FlashConfig>(m, "FlashConfig")
      .def(py::init<>())
      .def_readwrite("page_size", &FlashConfig::page_size)
      .def_readwrite("planes_per_die", &FlashConfig::planes_per_die)
      .def_readwrite("dies_per_chip", &FlashConfig::dies_per_chip)
      .def_readwrite("chips_per_channel", &FlashConfig::chips_per_channel)
      .def_readwrite("channels", &FlashConfig::channels)
      .def_readwrite("blocks_per_plane", &FlashConfig::blocks_per_plane)
      .def_readwrite("pages_per_block", &FlashConfig::pages_per_block)
      .def_readwrite("timing", &FlashConfig::timing)
      .def_readwrite("page_read_energy", &FlashConfig::page_read_energy)
      .def_readwrite("reserved_block_fraction", &FlashConfig::reserved_block_fraction)
      .def_property_readonly("cell_type", [](const FlashConfig& c) { return std::string(to_string(c.cell_type)); })
      .def("validate", &FlashConfig::validate)
      .def("serialize", &serialize_flash_config)
      .def(py::self == py::self);

  m.def("flash_preset", py::overload_cast<std::string_view>(&flash_preset), py::arg("name"));
  m.def("parse_flash_config", &parse_flash_config, py::arg("text"));
  m.def("command_address_time", &command_address_time, py::arg("timing"));
  m.def("data_out_time", &data_out_time, py::arg("timing"), py::arg("n_bytes"));
  m.def("single_page_read_time", &single_page_read_time, py::arg("timing"), py::arg("vectors_in_page"),
        py::arg("vector_bytes"), py::arg("page_size"));
  m.def(
      "remap_cost",
      [](const FlashConfig& c, std::uint64_t pages, std::uint64_t blocks) {
        auto r = remap_cost(c, pages, blocks);
        return std::make_pair(r.latency_us, r.energy_uj);
      },
      py::arg("config"), py::arg("pages_moved"), py::arg("blocks_erased"));

  py::class_<FrequencyTable>(m, "FrequencyTable")
      .def_static(
          "build",
          [](std::uint32_t tables, std::uint32_t rows, const std::vector<std::pair<KeyTuple, std::uint64_t>>& counts,
             double hot_fraction) {
            auto kc = to_counts(counts);
            return FrequencyTable::build_from_counts(KeySpace(tables, rows), kc, hot_fraction);
          },
          py::arg("tables"), py::arg("rows_per_table"), py::arg("counts"), py::arg("hot_fraction"))
      .def(
          "adaptive_update",
          [](FrequencyTable& t, const std::vector<std::pair<KeyTuple, std::uint64_t>>& trained) {
            auto kc = to_counts(trained);
            auto s = t.adaptive_update(kc);
            py::dict d;
            d["keys_inserted_hot"] = s.keys_inserted_hot;
            d["keys_appended_tail"] = s.keys_appended_tail;
            d["keys_refreshed"] = s.keys_refreshed;
            d["comparisons"] = s.comparisons;
            d["pointer_writes"] = s.pointer_writes;
            d["hot_region_keys"] = from_keys(s.hot_region_keys_for_reassignment);
            d["direct_assignments"] = from_keys(s.direct_assignments);
            return d;
          },
          py::arg("trained"))
      .def("order", [](const FrequencyTable& t) { return from_keys(t.order()); })
      .def("hot_region", [](const FrequencyTable& t) { return from_keys(t.hot_region()); })
      .def("contains", [](const FrequencyTable& t, const KeyTuple& k) { return t.contains(to_key(k)); })
      .def("count", [](const FrequencyTable& t, const KeyTuple& k) { return t.count(to_key(k)); })
      .def("assign", [](FrequencyTable& t, const KeyTuple& k, SlotId s) { t.assign(to_key(k), s); })
      .def("lookup", [](const FrequencyTable& t, const KeyTuple& k) { return t.lookup(to_key(k)); })
      .def("evict", [](FrequencyTable& t, const KeyTuple& k) { t.evict(to_key(k)); })
      .def("threshold",
           [](const FrequencyTable& t) -> std::optional<KeyTuple> {
             if (auto k = t.threshold()) return from_key(*k);
             return std::nullopt;
           })
      .def("audit", &FrequencyTable::audit)
      .def_property_readonly("size", &FrequencyTable::size)
      .def_property_readonly("hot_size", &FrequencyTable::hot_size);

  py::class_<PageCache>(m, "PageCache")
      .def(py::init<std::uint64_t, std::uint32_t>(), py::arg("capacity_bytes") = PageCache::kDefaultCapacityBytes,
           py::arg("page_size") = 16384)
      .def("access", [](PageCache& c, std::uint64_t p) { return c.access_page(p).hit; }, py::arg("page"))
      .def("contains", &PageCache::contains)
      .def("flush", &PageCache::flush)
      .def("recency", &PageCache::recency)
      .def_property_readonly("capacity_pages", &PageCache::capacity_pages)
      .def_property_readonly("hits", &PageCache::hits)
      .def_property_readonly("misses", &PageCache::misses);

  py::class_<VectorCache>(m, "VectorCache")
      .def(py::init<std::size_t>(), py::arg("per_table") = VectorCache::kDefaultPerTable)
      .def("access", [](VectorCache& c, const KeyTuple& k) { return c.access_vector(to_key(k)).hit; }, py::arg("key"))
      .def("occupancy", &VectorCache::occupancy)
      .def_property_readonly("hits", &VectorCache::hits)
      .def_property_readonly("misses", &VectorCache::misses);

  m.def(
      "generate_trace",
      [](const std::string& preset, double unique_rate, std::uint64_t queries, std::uint64_t seed,
         std::uint32_t rows_per_table, std::uint32_t hot_keys) {
        TraceSpec ts;
        ts.preset = dlrm_preset(preset);
        ts.unique_rate = unique_rate;
        ts.num_queries = queries;
        ts.seed = seed;
        ts.rows_per_table = rows_per_table;
        ts.hot_keys = hot_keys;
        TraceGenerator g(ts);
        std::vector<std::vector<std::uint32_t>> out;
        TraceEvent ev;
        while (g.next(ev))
          if (ev.kind == TraceEvent::Kind::Query) out.push_back(std::move(ev.query.rows));
        return out;
      },
      py::arg("preset"), py::arg("unique_rate"), py::arg("queries"), py::arg("seed") = 1,
      py::arg("rows_per_table") = 1'000'000, py::arg("hot_keys") = 1024,
      "Generated queries; each is a table-major list of rows.");
  m.def("resolve_unique_rate", &resolve_unique_rate, py::arg("name_or_value"));

  m.def(
      "describe_experiment", [](const std::string& text) { return describe(parse_experiment(text)); },
      py::arg("text"), "Resolved key = value form of an experiment file's text.");
  m.def(
      "run_experiment",
      [](const std::string& text) {
        const auto spec = parse_experiment(text);
        SweepResult res;
        {
          py::gil_scoped_release nogil;
          res = run_sweep(spec);
        }
        py::list rows;
        for (const auto& r : res.rows) rows.append(row_dict(r));
        return rows;
      },
      py::arg("text"), "Runs a sweep from experiment-file text and returns one dict per (cell, policy).");
  m.def(
      "experiment_csv",
      [](const std::string& text) {
        const auto spec = parse_experiment(text);
        std::ostringstream os;
        {
          py::gil_scoped_release nogil;
          write_csv(os, run_sweep(spec));
        }
        return os.str();
      },
      py::arg("text"));
  m.def(
      "run_timeline",
      [](const std::string& text) {
        const auto spec = timeline_spec(parse_experiment(text));
        TimelineReport rep;
        {
          py::gil_scoped_release nogil;
          rep = recflash::run_timeline(spec);
        }
        py::dict d;
        py::list days;
        for (const auto& r : rep.days) {
          py::dict x;
          x["day"] = r.day;
          x["baseline_us"] = r.baseline_us;
          x["recflash_us"] = r.recflash_us;
          x["remap_in_flight"] = r.remap_in_flight;
          x["remap_overhead_us"] = r.remap_overhead_us;
          x["triggered"] = r.triggered;
          days.append(x);
        }
        d["days"] = days;
        py::dict curves;
        for (const auto& c : rep.curves)
          curves[py::int_(c.daily_inferences)] = py::make_tuple(c.baseline_cumulative_us, c.recflash_cumulative_us);
        d["curves"] = curves;
        d["remap_events"] = rep.recflash.remap_events.size();
        return d;
      },
      py::arg("text"));
}
