#include "recflash/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "recflash/kv_config.hpp"

namespace recflash {

void DlrmPreset::validate() const {
  if (num_tables == 0 || embedding_dim == 0 || lookups_per_query == 0)
    throw std::invalid_argument("model shape needs at least one table, dimension and lookup");
}

DlrmPreset dlrm_preset(std::string_view name) {
  std::string n(name);
  for (auto& c : n) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (n == "RMC1") return {"RMC1", 8, 32, 80, "128-64-32", "256-64-1"};
  if (n == "RMC2") return {"RMC2", 32, 64, 120, "256-128-64", "128-64-1"};
  if (n == "RMC3") return {"RMC3", 10, 32, 20, "2560-1024-256-32", "512-256-1"};
  throw std::invalid_argument("unknown model preset '" + std::string(name) + "' (valid: rmc1, rmc2, rmc3)");
}

std::vector<int> parse_mlp_layers(std::string_view layers) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= layers.size()) {
    auto end = layers.find('-', pos);
    if (end == std::string_view::npos) end = layers.size();
    auto tok = layers.substr(pos, end - pos);
    int v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size() || v <= 0)
      throw std::invalid_argument("bad MLP layer list '" + std::string(layers) + "'");
    out.push_back(v);
    pos = end + 1;
  }
  return out;
}

const std::vector<std::pair<std::string, double>>& locality_presets() {
  static const std::vector<std::pair<std::string, double>> k = {
      {"K0", 0.08}, {"K0.3", 0.15}, {"K0.8", 0.35}, {"K1", 0.45}, {"K2", 0.66}};
  return k;
}

double locality_preset(std::string_view name) {
  for (const auto& [n, v] : locality_presets())
    if (n == name) return v;
  throw std::invalid_argument("unknown locality preset '" + std::string(name) + "' (valid: K0, K0.3, K0.8, K1, K2)");
}

void TraceSpec::validate() const {
  preset.validate();
  if (!(unique_rate > 0.0 && unique_rate <= 1.0)) throw std::invalid_argument("unique_rate must lie in (0, 1]");
  if (rows_per_table == 0) throw std::invalid_argument("rows_per_table must be positive");
  if (days == 0) throw std::invalid_argument("days must be positive");
  if (!(drift >= 0.0 && drift <= 1.0)) throw std::invalid_argument("drift must lie in [0, 1]");
  if (hot_keys == 0) throw std::invalid_argument("hot_keys must be positive");
  if (!(zipf_exponent >= 0.0)) throw std::invalid_argument("zipf_exponent must be non-negative");
}

namespace {

std::vector<double> zipf_pmf(std::uint32_t h, double s) {
  std::vector<double> p(h);
  double total = 0;
  for (std::uint32_t r = 0; r < h; ++r) total += p[r] = std::pow(r + 1.0, -s);
  for (auto& v : p) v /= total;
  return p;
}

std::uint64_t fresh_reserve(const TraceSpec& spec, std::uint32_t h) {
  return spec.drift > 0 ? std::uint64_t{h} * (spec.days - 1) : 0;
}

}  // namespace

double expected_distinct_zipf(std::uint32_t h, double s, double n) {
  if (h == 0 || n <= 0) return 0.0;
  double d = 0;
  for (double p : zipf_pmf(h, s)) d += p >= 1.0 ? 1.0 : -std::expm1(n * std::log1p(-p));
  return d;
}

LocalityPlan plan_locality(const TraceSpec& spec) {
  spec.validate();
  const std::uint64_t lookups = spec.preset.lookups_per_query;
  const std::uint64_t per_day_queries = (spec.num_queries + spec.days - 1) / spec.days;
  const double n = static_cast<double>(per_day_queries * lookups);
  const double total = static_cast<double>(spec.num_queries * lookups);
  const double u = spec.unique_rate;
  LocalityPlan plan;
  if (spec.num_queries == 0) {
    plan.hot_keys = std::min(spec.hot_keys, spec.rows_per_table);
    plan.expected_unique_rate = u;
    return plan;
  }
  auto infeasible = [&](double hi) {
    std::ostringstream os;
    os << "unique_rate " << u << " is infeasible for " << spec.num_queries << " queries x " << lookups
       << " lookups over " << spec.rows_per_table << " rows; feasible range is [" << 1.0 / n << ", "
       << std::min(1.0, hi) << "]";
    return std::invalid_argument(os.str());
  };
  if (u >= 1.0) {
    if (total > spec.rows_per_table) throw infeasible(spec.rows_per_table / total);
    plan.hot_keys = 0;
    plan.cold_probability = 1.0;
    plan.expected_unique_rate = 1.0;
    return plan;
  }
  const double target = u * n;
  if (target < 1.0) throw infeasible(spec.rows_per_table / total);
  std::uint32_t h = std::min(spec.hot_keys, spec.rows_per_table);
  if (expected_distinct_zipf(h, spec.zipf_exponent, n) > target) {
    std::uint32_t lo = 1, hi = h;  // D(lo) <= target < D(hi)
    while (hi - lo > 1) {
      auto mid = lo + (hi - lo) / 2;
      (expected_distinct_zipf(mid, spec.zipf_exponent, n) <= target ? lo : hi) = mid;
    }
    h = lo;
  }
  double qlo = 0.0, qhi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double q = 0.5 * (qlo + qhi);
    const double d = q * n + expected_distinct_zipf(h, spec.zipf_exponent, (1.0 - q) * n);
    (d < target ? qlo : qhi) = q;
  }
  plan.hot_keys = h;
  plan.cold_probability = 0.5 * (qlo + qhi);
  plan.expected_unique_rate =
      (plan.cold_probability * n + expected_distinct_zipf(h, spec.zipf_exponent, (1 - plan.cold_probability) * n)) /
      n;
  const double reserve = static_cast<double>(h + fresh_reserve(spec, h));
  if (reserve >= spec.rows_per_table) throw infeasible(0.0);
  const double cold_capacity = spec.rows_per_table - reserve;
  // Leave a few standard deviations of headroom for the binomial cold count.
  const double cold_need = plan.cold_probability * total;
  if (cold_need + 4.0 * std::sqrt(cold_need + 1.0) > cold_capacity)
    throw infeasible((cold_capacity + h) / total);
  return plan;
}

TraceGenerator::TraceGenerator(const TraceSpec& spec) : spec_(spec), plan_(plan_locality(spec)) {
  const auto h = plan_.hot_keys;
  auto pmf = zipf_pmf(h, spec_.zipf_exponent);
  cdf_.resize(h);
  double acc = 0;
  for (std::uint32_t r = 0; r < h; ++r) cdf_[r] = acc += pmf[r];
  fresh_capacity_ = fresh_reserve(spec_, h);
  cold_capacity_ = spec_.rows_per_table - h - fresh_capacity_;
  rng_.seed(splitmix64(spec_.seed ^ splitmix64(spec_.stream + 0x5151)));
  tables_.reserve(spec_.preset.num_tables);
  for (std::uint32_t t = 0; t < spec_.preset.num_tables; ++t) {
    const auto table_seed = splitmix64(spec_.seed * 0x100000001b3ULL + t + 1);
    Table tab{SeededPermutation(spec_.rows_per_table, table_seed), {}, 0, 0, 0};
    tab.hot.resize(h);
    for (std::uint32_t r = 0; r < h; ++r) tab.hot[r] = static_cast<std::uint32_t>(tab.perm(r));
    tab.cold_offset = cold_capacity_ ? splitmix64(table_seed ^ splitmix64(spec_.stream)) % cold_capacity_ : 0;
    tables_.push_back(std::move(tab));
  }
}

double TraceGenerator::uniform() { return static_cast<double>(rng_() >> 11) * 0x1p-53; }

void TraceGenerator::start_day(std::uint32_t) {
  if (spec_.drift <= 0) return;
  const auto h = plan_.hot_keys;
  for (auto& tab : tables_) {
    for (std::uint32_t r = 0; r < h; ++r) {
      if (uniform() < spec_.drift && tab.fresh_used < fresh_capacity_)
        tab.hot[r] = static_cast<std::uint32_t>(tab.perm(h + tab.fresh_used++));
    }
  }
}

bool TraceGenerator::next(TraceEvent& out) {
  const auto q_total = spec_.num_queries;
  if (spec_.days > 1 && day_ < spec_.days && emitted_ == day_ * q_total / spec_.days) {
    out.kind = TraceEvent::Kind::DayBoundary;
    out.day = day_;
    out.query = {};
    if (day_ > 0) start_day(day_);
    ++day_;
    return true;
  }
  if (emitted_ == q_total) return false;
  const auto tables = spec_.preset.num_tables;
  const auto lookups = spec_.preset.lookups_per_query;
  out.kind = TraceEvent::Kind::Query;
  out.day = day_ == 0 ? 0 : day_ - 1;
  out.query.tables = tables;
  out.query.lookups = lookups;
  out.query.rows.resize(std::size_t{tables} * lookups);
  const double q = plan_.cold_probability;
  const auto h = plan_.hot_keys;
  const auto cold_base = std::uint64_t{h} + fresh_capacity_;
  std::size_t i = 0;
  for (auto& tab : tables_) {
    for (std::uint32_t l = 0; l < lookups; ++l) {
      const double u = uniform();
      std::uint32_t row;
      if (u < q || h == 0) {
        const auto j = (tab.cold_offset + tab.cold_used++) % cold_capacity_;
        row = static_cast<std::uint32_t>(tab.perm(cold_base + j));
      } else {
        const double v = (u - q) / (1.0 - q);
        auto rank = static_cast<std::uint32_t>(std::upper_bound(cdf_.begin(), cdf_.end(), v) - cdf_.begin());
        row = tab.hot[std::min(rank, h - 1)];
      }
      out.query.rows[i++] = row;
    }
  }
  ++emitted_;
  return true;
}

// --- Trace file ------------------------------------------------------------

TraceReader::TraceReader(std::unique_ptr<std::istream> in, const DlrmPreset& preset, std::uint32_t rows_per_table)
    : in_(std::move(in)), preset_(preset), rows_(rows_per_table) {
  preset_.validate();
}

namespace {

bool parse_u32(std::string_view s, std::uint32_t& v) {
  s = trim(s);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && p == s.data() + s.size() && !s.empty();
}

}  // namespace

bool TraceReader::next(TraceEvent& out) {
  std::string raw;
  while (std::getline(*in_, raw)) {
    ++line_no_;
    auto line = trim(raw);
    if (line.empty()) continue;
    if (line.starts_with("rfql-v1")) {
      if (header_seen_ || line_no_ > 1) throw TraceFormatError(line_no_, "header must be the first line");
      header_seen_ = true;
      std::istringstream hs{std::string(line.substr(7))};
      std::string tok;
      std::uint32_t tables = 0, lookups = 0;
      bool got_t = false, got_l = false;
      while (hs >> tok) {
        if (tok.starts_with("tables=")) {
          got_t = parse_u32(std::string_view(tok).substr(7), tables);
        } else if (tok.starts_with("lookups=")) {
          got_l = parse_u32(std::string_view(tok).substr(8), lookups);
        } else {
          throw TraceFormatError(line_no_, "unexpected header field '" + tok + "'");
        }
      }
      if (!got_t || !got_l) throw TraceFormatError(line_no_, "header needs tables=<n> lookups=<m>");
      if (tables != preset_.num_tables || lookups != preset_.lookups_per_query)
        throw TraceFormatError(line_no_, "trace shape " + std::to_string(tables) + "x" + std::to_string(lookups) +
                                             " does not match model " + std::to_string(preset_.num_tables) + "x" +
                                             std::to_string(preset_.lookups_per_query));
      continue;
    }
    if (line.starts_with("#day")) {
      std::uint32_t d = 0;
      if (!parse_u32(line.substr(4), d)) throw TraceFormatError(line_no_, "malformed day directive");
      out.kind = TraceEvent::Kind::DayBoundary;
      out.day = d;
      out.query = {};
      return true;
    }
    if (line.front() == '#') continue;
    out.kind = TraceEvent::Kind::Query;
    out.day = 0;
    auto& q = out.query;
    q.tables = preset_.num_tables;
    q.lookups = preset_.lookups_per_query;
    q.rows.clear();
    q.rows.reserve(std::size_t{q.tables} * q.lookups);
    std::uint32_t tables_seen = 0;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      auto end = line.find(';', pos);
      if (end == std::string_view::npos) end = line.size();
      auto group = line.substr(pos, end - pos);
      ++tables_seen;
      if (tables_seen > preset_.num_tables)
        throw TraceFormatError(line_no_, "more than " + std::to_string(preset_.num_tables) + " tables in query");
      std::uint32_t n = 0;
      std::size_t gp = 0;
      while (gp <= group.size()) {
        auto ge = group.find(',', gp);
        if (ge == std::string_view::npos) ge = group.size();
        std::uint32_t row = 0;
        if (!parse_u32(group.substr(gp, ge - gp), row))
          throw TraceFormatError(line_no_, "malformed row id '" + std::string(group.substr(gp, ge - gp)) + "'");
        if (row >= rows_)
          throw TraceFormatError(line_no_, "row id " + std::to_string(row) + " out of range (rows per table " +
                                               std::to_string(rows_) + ")");
        q.rows.push_back(row);
        ++n;
        gp = ge + 1;
      }
      if (n != preset_.lookups_per_query)
        throw TraceFormatError(line_no_, "table " + std::to_string(tables_seen - 1) + " has " + std::to_string(n) +
                                             " lookups, expected " + std::to_string(preset_.lookups_per_query));
      pos = end + 1;
    }
    if (tables_seen != preset_.num_tables)
      throw TraceFormatError(line_no_, "query has " + std::to_string(tables_seen) + " tables, expected " +
                                           std::to_string(preset_.num_tables));
    return true;
  }
  if (in_->bad()) throw std::runtime_error("read error in trace");
  return false;
}

std::unique_ptr<TraceReader> load_trace(const std::string& path, const DlrmPreset& preset,
                                        std::uint32_t rows_per_table) {
  auto f = std::make_unique<std::ifstream>(path);
  if (!*f) throw std::runtime_error("cannot open trace '" + path + "'");
  return std::make_unique<TraceReader>(std::move(f), preset, rows_per_table);
}

std::unique_ptr<TraceReader> parse_trace(std::string text, const DlrmPreset& preset, std::uint32_t rows_per_table) {
  return std::make_unique<TraceReader>(std::make_unique<std::istringstream>(std::move(text)), preset,
                                       rows_per_table);
}

std::uint64_t write_trace(std::ostream& out, QueryStream& stream) {
  out << "rfql-v1 tables=" << stream.tables() << " lookups=" << stream.lookups() << '\n';
  TraceEvent ev;
  std::uint64_t n = 0;
  std::string line;
  char buf[16];
  while (stream.next(ev)) {
    if (ev.kind == TraceEvent::Kind::DayBoundary) {
      out << "#day " << ev.day << '\n';
      continue;
    }
    line.clear();
    const auto& q = ev.query;
    for (std::size_t i = 0; i < q.rows.size(); ++i) {
      if (i) line += (i % q.lookups == 0) ? ';' : ',';
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, q.rows[i]);
      line.append(buf, p);
    }
    out << line << '\n';
    ++n;
  }
  return n;
}

std::vector<TraceEvent> collect(QueryStream& stream) {
  std::vector<TraceEvent> out;
  TraceEvent ev;
  while (stream.next(ev)) out.push_back(ev);
  return out;
}

bool sample_keeps(std::uint64_t seed, std::uint64_t query_index, double rate) {
  if (rate >= 1.0) return true;
  const auto h = splitmix64(seed ^ splitmix64(query_index));
  return static_cast<double>(h >> 11) * 0x1p-53 < rate;
}

DownsampledStream::DownsampledStream(QueryStream& inner, double rate, std::uint64_t seed)
    : inner_(&inner), rate_(rate), seed_(seed) {
  if (!(rate > 0.0 && rate <= 1.0)) throw std::invalid_argument("sampling rate must lie in (0, 1]");
}

bool DownsampledStream::next(TraceEvent& out) {
  while (inner_->next(out)) {
    if (out.kind == TraceEvent::Kind::DayBoundary) return true;
    if (sample_keeps(seed_, index_++, rate_)) return true;
  }
  return false;
}

std::vector<KeyCount> profile_counts(QueryStream& stream, double sample_rate, std::uint64_t seed) {
  DownsampledStream s(stream, sample_rate, seed);
  std::unordered_map<VectorKey, std::uint64_t> counts;
  TraceEvent ev;
  while (s.next(ev)) {
    if (ev.kind != TraceEvent::Kind::Query) continue;
    for (std::size_t i = 0; i < ev.query.size(); ++i) ++counts[ev.query.key(i)];
  }
  std::vector<KeyCount> out;
  out.reserve(counts.size());
  for (auto [k, c] : counts) out.push_back({k, c});
  std::sort(out.begin(), out.end(), [](const KeyCount& a, const KeyCount& b) { return a.key < b.key; });
  return out;
}

std::vector<std::uint32_t> profile_dense(QueryStream& stream, const KeySpace& space, double sample_rate,
                                         std::uint64_t seed) {
  DownsampledStream s(stream, sample_rate, seed);
  std::vector<std::uint32_t> counts(space.size(), 0);
  TraceEvent ev;
  while (s.next(ev)) {
    if (ev.kind != TraceEvent::Kind::Query) continue;
    for (std::size_t i = 0; i < ev.query.size(); ++i) {
      auto& c = counts[space.index(ev.query.key(i))];
      if (c != 0xffffffffu) ++c;
    }
  }
  return counts;
}

StreamStats measure_stream(std::span<const TraceEvent> events, std::uint32_t tables) {
  StreamStats st;
  std::vector<std::unordered_set<std::uint32_t>> distinct(tables);
  std::vector<std::uint64_t> accesses(tables, 0);
  for (const auto& ev : events) {
    if (ev.kind != TraceEvent::Kind::Query) continue;
    ++st.queries;
    for (std::size_t i = 0; i < ev.query.size(); ++i) {
      auto k = ev.query.key(i);
      distinct[k.table].insert(k.row);
      ++accesses[k.table];
      ++st.accesses;
    }
  }
  for (std::uint32_t t = 0; t < tables; ++t)
    st.unique_rate_per_table.push_back(accesses[t] ? double(distinct[t].size()) / double(accesses[t]) : 0.0);
  return st;
}

}  // namespace recflash
