#include "recflash/engine.hpp"

#include <algorithm>
#include <charconv>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "recflash/kv_config.hpp"

namespace recflash {

std::string_view to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::SeqDataOut:
      return "seq";
    case PolicyKind::SelDataOut:
      return "sel";
    case PolicyKind::RecFlash:
      return "recflash";
  }
  return "?";
}

PolicyKind parse_policy_kind(std::string_view name) {
  if (name == "seq" || name == "SeqDataOut") return PolicyKind::SeqDataOut;
  if (name == "sel" || name == "SelDataOut") return PolicyKind::SelDataOut;
  if (name == "recflash" || name == "RecFlash") return PolicyKind::RecFlash;
  throw std::invalid_argument("unknown lookup policy '" + std::string(name) + "' (valid: seq, sel, recflash)");
}

void SimReport::merge(const SimReport& o) {
  queries += o.queries;
  embedding_time += o.embedding_time;
  embedding_latency_us = embedding_time.us();
  end_to_end_latency_us += o.end_to_end_latency_us;
  read_energy_uj += o.read_energy_uj;
  page_reads += o.page_reads;
  cache_hits += o.cache_hits;
  cache_misses += o.cache_misses;
  vector_cache_hits += o.vector_cache_hits;
  vector_cache_misses += o.vector_cache_misses;
  bytes_fetched_useful += o.bytes_fetched_useful;
  bytes_fetched_total += o.bytes_fetched_total;
  bytes_transferred += o.bytes_transferred;
  cache_flushes += o.cache_flushes;
  remap_events.insert(remap_events.end(), o.remap_events.begin(), o.remap_events.end());
  cumulative_days = std::max(cumulative_days, o.cumulative_days);
}

// RMC3 is MLP-heavy: its MLP time exceeds its K2 RecFlash embedding latency on TLC
// (about 5.5 ms per query); RMC1 and RMC2 stay embedding-dominated.
MlpCostModel MlpCostModel::defaults() { return {2000.0, 3000.0, 8000.0, 0.0}; }

double MlpCostModel::cost_us(const DlrmPreset& preset) const {
  if (preset.name == "RMC1") return rmc1_us;
  if (preset.name == "RMC2") return rmc2_us;
  if (preset.name == "RMC3") return rmc3_us;
  return other_us;
}

double end_to_end_latency(double embedding_us, const DlrmPreset& preset, const MlpCostModel& mlp) {
  return embedding_us + mlp.cost_us(preset);
}

float payload_value(const VectorKey& key, std::uint32_t element) {
  const auto h = splitmix64(((std::uint64_t{key.table} << 32) | key.row) ^ (std::uint64_t{element} * 0x9e3779b97f4a7c15ULL));
  // 16-bit fixed point in [-0.5, 0.5): sums of a few hundred stay exact.
  return static_cast<float>(static_cast<double>(h >> 48) / 65536.0 - 0.5);
}

Engine::Engine(const FlashConfig& config, const AddressResolver& layout, EngineOptions options,
               const MlpCostModel& mlp, const DlrmPreset* preset)
    : config_(config), ticks_(config.timing), layout_(&layout), options_(options), mlp_(mlp) {
  config_.validate_for_vector(layout.geometry().vector_bytes());
  if (!(options_.cache_hit_latency_us >= 0)) throw std::invalid_argument("cache hit latency must be non-negative");
  if (preset) preset_ = *preset;
  if (options_.policy == PolicyKind::RecFlash) page_cache_.emplace(options_.page_cache_bytes, config_.page_size);
  if (options_.vector_cache_per_table > 0) vector_cache_.emplace(options_.vector_cache_per_table);
  die_ready_.assign(config_.total_dies(), Picoseconds{});
  channel_free_.assign(config_.channels, Picoseconds{});
  report_.policy = std::string(to_string(options_.policy));
}

void Engine::flush_cache() {
  if (page_cache_) {
    page_cache_->flush();
    ++report_.cache_flushes;
  }
}

void Engine::ScratchIndex::reset(std::size_t expected) {
  std::size_t cap = 16;
  while (cap < 2 * expected) cap <<= 1;
  if (cap > keys_.size()) {
    keys_.assign(cap, 0);
    values_.assign(cap, 0);
    stamps_.assign(cap, 0);
    stamp_ = 0;
    mask_ = cap - 1;
  }
  if (++stamp_ == 0) {
    std::fill(stamps_.begin(), stamps_.end(), 0);
    stamp_ = 1;
  }
}

std::pair<std::uint32_t, bool> Engine::ScratchIndex::insert(std::uint64_t key, std::uint32_t value) {
  std::size_t h = static_cast<std::size_t>(splitmix64(key)) & mask_;
  while (stamps_[h] == stamp_) {
    if (keys_[h] == key) return {values_[h], false};
    h = (h + 1) & mask_;
  }
  stamps_[h] = stamp_;
  keys_[h] = key;
  values_[h] = value;
  return {value, true};
}

QueryCost Engine::serve_query(const LookupQuery& query, std::vector<float>* sls) {
  const auto& geo = layout_->geometry();
  const std::uint32_t v = geo.vector_bytes();
  const std::uint32_t dim = v / 4;
  QueryCost cost;
  pages_.clear();
  seen_slots_.reset(query.size());
  page_index_.reset(query.size());
  if (sls) sls->assign(std::size_t{query.tables} * dim, 0.0f);
  if (!vector_cache_) layout_->resolve_all(query, slots_);

  for (std::size_t i = 0; i < query.size(); ++i) {
    const auto key = query.key(i);
    bool from_dram = false;
    if (vector_cache_) {
      if (vector_cache_->access_vector(key).hit) {
        ++cost.vector_cache_hits;
        from_dram = true;
      } else {
        ++cost.vector_cache_misses;
      }
    }
    if (from_dram) {
      if (sls)
        for (std::uint32_t e = 0; e < dim; ++e) (*sls)[std::size_t{key.table} * dim + e] += payload_value(key, e);
      continue;
    }
    const auto slot = vector_cache_ ? layout_->resolve(key) : slots_[i];
    if (sls) {
      auto stored = layout_->stored_key(slot);
      if (!stored) throw std::logic_error("slot of " + to_string(key) + " holds no data");
      for (std::uint32_t e = 0; e < dim; ++e) (*sls)[std::size_t{key.table} * dim + e] += payload_value(*stored, e);
    }
    // Distinct slots grouped by page; pages keep first-touch order.
    if (!seen_slots_.insert(slot, 0).second) continue;
    const auto page = geo.page_of(slot);
    const auto [idx, fresh] = page_index_.insert(page, static_cast<std::uint32_t>(pages_.size()));
    if (fresh) pages_.push_back({page, 0, 0, true, static_cast<std::uint32_t>(i)});
    auto& w = pages_[idx];
    ++w.vectors;
    w.last_offset = std::max(w.last_offset, geo.offset_of(slot));
  }

  for (auto& w : pages_) {
    if (page_cache_) {
      if (page_cache_->access_page(w.page).hit) {
        w.miss = false;
        ++cost.cache_hits;
        continue;
      }
      ++cost.cache_misses;
    }
    ++cost.page_reads;
    cost.bytes_useful += std::uint64_t{w.vectors} * v;
    cost.bytes_page_buffer += config_.page_size;
    cost.bytes_transferred += options_.policy == PolicyKind::SeqDataOut ? std::uint64_t{w.last_offset} + v
                                                                         : std::uint64_t{w.vectors} * v;
  }

  cost.latency = schedule() + Picoseconds::from_us(options_.cache_hit_latency_us) *
                                  static_cast<std::int64_t>(cost.cache_hits);

  auto& r = report_;
  ++r.queries;
  r.embedding_time += cost.latency;
  r.embedding_latency_us = r.embedding_time.us();
  r.end_to_end_latency_us = r.embedding_latency_us + double(r.queries) * (preset_ ? mlp_.cost_us(*preset_) : 0.0);
  r.page_reads += cost.page_reads;
  r.cache_hits += cost.cache_hits;
  r.cache_misses += cost.cache_misses;
  r.vector_cache_hits += cost.vector_cache_hits;
  r.vector_cache_misses += cost.vector_cache_misses;
  r.bytes_fetched_useful += cost.bytes_useful;
  r.bytes_fetched_total += cost.bytes_page_buffer;
  r.bytes_transferred += cost.bytes_transferred;
  r.read_energy_uj = read_energy(config_, r.page_reads) + double(r.bytes_transferred) * config_.data_out_energy_per_byte +
                     double(r.cache_hits) * config_.cache_hit_energy;
  return cost;
}

Picoseconds Engine::schedule() {
  const auto& geo = layout_->geometry();
  const auto ppd = config_.planes_per_die;
  const auto dies_per_channel = std::uint64_t{config_.dies_per_chip} * config_.chips_per_channel;
  const auto v = geo.vector_bytes();
  const bool sequential = options_.policy == PolicyKind::SeqDataOut;

  struct Die {
    std::uint64_t id;
    std::vector<std::vector<std::uint32_t>> planes;
    std::size_t batches = 0;
    std::size_t next = 0;
    Picoseconds data_out{};
  };
  std::vector<Die> dies;
  std::unordered_map<std::uint64_t, std::size_t> die_slot;
  for (std::uint32_t i = 0; i < pages_.size(); ++i) {
    if (!pages_[i].miss) continue;
    const auto plane = geo.plane_of_page(pages_[i].page);
    const auto d = geo.die_of_plane(plane);
    auto [it, inserted] = die_slot.try_emplace(d, dies.size());
    if (inserted) dies.push_back({d, std::vector<std::vector<std::uint32_t>>(ppd)});
    auto& q = dies[it->second].planes[geo.plane_in_die(plane)];
    q.push_back(i);
    dies[it->second].batches = std::max(dies[it->second].batches, q.size());
  }

  const bool pipe = options_.pipelined;
  std::vector<Picoseconds> local_channel(config_.channels, Picoseconds{});
  auto& chan = pipe ? channel_free_ : local_channel;

  struct Ev {
    std::int64_t t;
    std::uint64_t seq;
    std::uint32_t die;
    std::uint8_t phase;  // 0 request C/A, 1 array read done, 2 data-out done
    bool operator>(const Ev& o) const { return t != o.t ? t > o.t : seq > o.seq; }
  };
  std::priority_queue<Ev, std::vector<Ev>, std::greater<>> events;
  std::uint64_t seq = 0;
  for (std::uint32_t k = 0; k < dies.size(); ++k)
    events.push({pipe ? die_ready_[dies[k].id].count() : 0, seq++, k, 0});

  const auto tca = ticks_.command_address();
  Picoseconds finish{};
  while (!events.empty()) {
    auto ev = events.top();
    events.pop();
    auto& die = dies[ev.die];
    auto& ch = chan[die.id / dies_per_channel];
    const Picoseconds t(ev.t);
    switch (ev.phase) {
      case 0: {
        std::int64_t n = 0;
        die.data_out = Picoseconds{};
        for (const auto& q : die.planes) {
          if (die.next >= q.size()) continue;
          const auto& w = pages_[q[die.next]];
          ++n;
          die.data_out += sequential ? ticks_.data_out(std::uint64_t{w.last_offset} + v)
                              : ticks_.data_out(v) * static_cast<std::int64_t>(w.vectors);
        }
        const auto start = max(t, ch);
        ch = start + tca * n;
        events.push({(ch + ticks_.r).count(), seq++, ev.die, 1});
        break;
      }
      case 1: {
        const auto start = max(t, ch);
        ch = start + die.data_out;
        events.push({ch.count(), seq++, ev.die, 2});
        break;
      }
      default: {
        if (++die.next < die.batches) {
          events.push({ev.t, seq++, ev.die, 0});
        } else {
          finish = max(finish, t);
          if (pipe) die_ready_[die.id] = t;
        }
      }
    }
  }
  if (!pipe) return finish;
  const auto end = max(finish, last_finish_);
  const auto lat = end - last_finish_;
  last_finish_ = end;
  return lat;
}

void Engine::serve_stream(QueryStream& stream) {
  TraceEvent ev;
  while (stream.next(ev)) {
    if (ev.kind == TraceEvent::Kind::DayBoundary) {
      ++report_.cumulative_days;
      continue;
    }
    serve_query(ev.query);
  }
}

TriggerPolicy TriggerPolicy::parse(std::string_view text) {
  TriggerPolicy p;
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find(':', pos);
    if (end == std::string_view::npos) end = text.size();
    parts.emplace_back(trim(text.substr(pos, end - pos)));
    pos = end + 1;
  }
  auto num = [&](const std::string& s) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw std::invalid_argument("bad number '" + s + "' in trigger '" + std::string(text) + "'");
    return v;
  };
  if (parts[0] == "daily" && parts.size() == 1) {
    p.kind = Kind::Periodic;
    p.period_days = 1;
  } else if (parts[0] == "periodic" && parts.size() <= 2) {
    p.kind = Kind::Periodic;
    if (parts.size() == 2) {
      const double d = num(parts[1]);
      if (d < 1 || d != static_cast<std::uint32_t>(d)) throw std::invalid_argument("period must be a whole number of days");
      p.period_days = static_cast<std::uint32_t>(d);
    }
  } else if (parts[0] == "threshold" && parts.size() <= 3) {
    p.kind = Kind::Threshold;
    if (parts.size() >= 2) p.hot_fraction = num(parts[1]);
    if (parts.size() == 3) p.portion = num(parts[2]);
  } else {
    throw std::invalid_argument("unknown trigger '" + std::string(text) +
                                "' (valid: daily, periodic[:days], threshold[:x[:p]])");
  }
  p.validate();
  return p;
}

std::string TriggerPolicy::to_string() const {
  if (kind == Kind::Periodic) return "periodic:" + std::to_string(period_days);
  return "threshold:" + format_double(hot_fraction) + ":" + format_double(portion);
}

void TriggerPolicy::validate() const {
  if (!(hot_fraction > 0.0 && hot_fraction <= 1.0)) throw std::invalid_argument("trigger hot fraction must lie in (0, 1]");
  if (!(portion > 0.0)) throw std::invalid_argument("trigger portion must be positive");
  if (period_days < 1) throw std::invalid_argument("trigger period must be at least one day");
}

bool check_trigger(std::span<const KeyCount> window, const FrequencyTable& reference, const TriggerPolicy& policy,
                   std::uint32_t day) {
  if (policy.kind == TriggerPolicy::Kind::Periodic) return day > 0 && day % policy.period_days == 0;
  auto tau = reference.threshold();
  if (!tau || window.empty()) return false;
  const auto f_tau = reference.count(*tau);
  std::uint64_t above = 0;
  for (const auto& kc : window) above += kc.count > f_tau;
  return static_cast<double>(above) > policy.portion * static_cast<double>(window.size());
}

}  // namespace recflash
