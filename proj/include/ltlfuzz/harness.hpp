#pragma once

// In-process target contract: a deterministic reactive subject that declares
// its control-flow locations and fires proposition events as it processes
// input messages.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ltlfuzz/buchi.hpp"
#include "ltlfuzz/monitor.hpp"

namespace ltlfuzz {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Hashing

inline std::uint32_t fnv1a32(std::string_view bytes) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Inputs

inline constexpr std::size_t kDefaultMaxInputSize = 64 * 1024;

/// A sequence of protocol messages, each delivered to the target atomically.
struct Input {
  std::vector<std::string> messages;

  std::size_t size() const { return messages.size(); }
  bool empty() const { return messages.empty(); }
  /// Length of the length-prefixed serialization.
  std::size_t serialized_size() const {
    std::size_t n = 4;
    for (const auto& m : messages) n += 4 + m.size();
    return n;
  }
  Input prefix(std::size_t count) const {
    count = std::min(count, messages.size());
    return Input{{messages.begin(), messages.begin() + static_cast<std::ptrdiff_t>(count)}};
  }

  friend bool operator==(const Input&, const Input&) = default;
};

namespace detail {
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i) & 0xFF));
}
inline std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}
}  // namespace detail

/// Little-endian u32 message count, then per message a u32 length and the bytes.
inline std::string serialize_input(const Input& in) {
  std::string out;
  detail::put_u32(out, static_cast<std::uint32_t>(in.messages.size()));
  for (const auto& m : in.messages) {
    detail::put_u32(out, static_cast<std::uint32_t>(m.size()));
    out += m;
  }
  return out;
}

/// Parses a serialized input; `consumed` receives the number of bytes read.
inline Input deserialize_input(std::string_view bytes, std::size_t* consumed = nullptr) {
  auto need = [&bytes](std::size_t at, std::size_t n) {
    if (at + n > bytes.size()) throw ConfigError("truncated serialized input");
  };
  need(0, 4);
  std::uint32_t count = detail::get_u32(bytes, 0);
  std::size_t pos = 4;
  Input in;
  for (std::uint32_t i = 0; i < count; ++i) {
    need(pos, 4);
    std::uint32_t len = detail::get_u32(bytes, pos);
    pos += 4;
    need(pos, len);
    in.messages.emplace_back(bytes.substr(pos, len));
    pos += len;
  }
  if (consumed) *consumed = pos;
  return in;
}

inline std::uint64_t input_hash(const Input& in) { return fnv1a64(serialize_input(in)); }

inline std::string to_hex(std::string_view bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char c : bytes) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 15]);
  }
  return out;
}

inline std::string from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2) throw ConfigError("odd-length hex string");
  std::string out;
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    int hi = nibble(hex[i]), lo = nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) throw ConfigError("invalid hex digit");
    out.push_back(static_cast<char>(hi << 4 | lo));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Location graph

class LocationGraph {
 public:
  LocationId add(std::string name, bool loop_entry = false) {
    if (index_.count(name)) throw ConfigError("duplicate location '" + name + "'");
    LocationId id = static_cast<LocationId>(names_.size());
    index_.emplace(name, id);
    names_.push_back(std::move(name));
    loop_entry_.push_back(loop_entry);
    succ_.emplace_back();
    return id;
  }

  void edge(LocationId from, LocationId to) {
    check(from);
    check(to);
    succ_[from].push_back(to);
  }

  std::size_t size() const { return names_.size(); }
  const std::string& name(LocationId id) const { return names_.at(id); }
  bool is_loop_entry(LocationId id) const { return loop_entry_.at(id); }
  const std::vector<LocationId>& successors(LocationId id) const { return succ_.at(id); }

  std::optional<LocationId> find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? std::nullopt : std::optional<LocationId>(it->second);
  }

  /// Shortest directed hop count from every node to `target` (kInfinite if unreachable).
  std::vector<std::uint32_t> distances_to(LocationId target) const {
    check(target);
    std::vector<std::vector<LocationId>> pred(size());
    for (LocationId s = 0; s < size(); ++s)
      for (LocationId t : succ_[s]) pred[t].push_back(s);
    std::vector<std::uint32_t> dist(size(), kInfinite);
    std::deque<LocationId> queue{target};
    dist[target] = 0;
    while (!queue.empty()) {
      LocationId v = queue.front();
      queue.pop_front();
      for (LocationId p : pred[v]) {
        if (dist[p] == kInfinite) {
          dist[p] = dist[v] + 1;
          queue.push_back(p);
        }
      }
    }
    return dist;
  }

 private:
  void check(LocationId id) const {
    if (id >= size()) throw ConfigError("unknown location id " + std::to_string(id));
  }

  std::vector<std::string> names_;
  std::vector<bool> loop_entry_;
  std::vector<std::vector<LocationId>> succ_;
  std::map<std::string, LocationId> index_;
};

inline std::uint32_t location_distance(const LocationGraph& g, LocationId from, LocationId target) {
  if (from >= g.size()) throw ConfigError("unknown location id " + std::to_string(from));
  return g.distances_to(target)[from];
}

// ---------------------------------------------------------------------------
// Proposition map

struct MapEntry {
  std::string location;
  std::string condition;
};

/// Which program locations can fire each proposition, plus the loop-header propositions.
struct PropositionMap {
  std::map<std::string, std::vector<MapEntry>> entries;
  std::vector<std::string> loop_headers;

  bool is_loop_header(const std::string& p) const {
    return std::find(loop_headers.begin(), loop_headers.end(), p) != loop_headers.end();
  }

  std::vector<std::string> propositions() const {
    std::vector<std::string> out;
    for (const auto& [p, _] : entries) out.push_back(p);
    return out;
  }

  static PropositionMap from_json(const nlohmann::json& j) {
    PropositionMap m;
    try {
      for (const auto& [prop, list] : j.at("propositions").items()) {
        auto& dst = m.entries[prop];
        for (const auto& e : list)
          dst.push_back({e.at("location").get<std::string>(), e.value("condition", std::string("true"))});
      }
      if (j.contains("loop_headers")) m.loop_headers = j.at("loop_headers").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed proposition map: ") + e.what());
    }
    for (const auto& l : m.loop_headers)
      if (!m.entries.count(l)) throw ConfigError("loop-header proposition '" + l + "' has no locations");
    return m;
  }

  static PropositionMap parse(std::string_view text) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("proposition map is not valid JSON: ") + e.what());
    }
    return from_json(j);
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["propositions"] = nlohmann::ordered_json::object();
    for (const auto& [p, list] : entries) {
      auto arr = nlohmann::ordered_json::array();
      for (const auto& e : list) arr.push_back({{"location", e.location}, {"condition", e.condition}});
      j["propositions"][p] = std::move(arr);
    }
    j["loop_headers"] = loop_headers;
    return j;
  }

  std::uint64_t digest() const { return fnv1a64(to_json().dump()); }
};

/// A proposition map checked against a subject's location graph and a property.
struct ResolvedMap {
  std::map<std::string, std::vector<LocationId>> locations;
  std::set<std::pair<std::string, LocationId>> allowed;
  std::set<std::string> loop_headers;

  bool is_loop_header(const std::string& p) const { return loop_headers.count(p) > 0; }
};

inline ResolvedMap resolve_map(const PropositionMap& map, const LocationGraph& graph,
                               const std::set<std::string>& property_aps) {
  for (const auto& p : property_aps)
    if (!map.entries.count(p) || map.entries.at(p).empty())
      throw ConfigError("proposition '" + p + "' is not mapped to any program location");
  ResolvedMap r;
  for (const auto& [p, list] : map.entries) {
    for (const auto& e : list) {
      auto id = graph.find(e.location);
      if (!id) throw ConfigError("proposition '" + p + "' maps to unknown location '" + e.location + "'");
      if (map.is_loop_header(p) && !graph.is_loop_entry(*id))
        throw ConfigError("loop-header proposition '" + p + "' maps to non-loop location '" + e.location + "'");
      r.locations[p].push_back(*id);
      r.allowed.insert({p, *id});
    }
  }
  r.loop_headers.insert(map.loop_headers.begin(), map.loop_headers.end());
  return r;
}

// ---------------------------------------------------------------------------
// Target contract

enum class ObservationKind { LocationVisited, EventFired, StepBudgetExhausted };

struct Observation {
  ObservationKind kind = ObservationKind::LocationVisited;
  LocationId location = 0;
  std::string proposition;
  bool records_state = false;

  static Observation visit(LocationId l) { return {ObservationKind::LocationVisited, l, {}, false}; }
  static Observation fire(std::string p, LocationId l, bool records_state) {
    return {ObservationKind::EventFired, l, std::move(p), records_state};
  }
  static Observation exhausted() { return {ObservationKind::StepBudgetExhausted, 0, {}, false}; }
};

inline constexpr std::uint64_t kDefaultStepBudget = 1'000'000;

/// A deterministic reactive program under test. Identical reset + message
/// sequences must produce identical observations and addressable state.
class Target {
 public:
  virtual ~Target() = default;

  virtual void reset() = 0;
  /// Delivers one message; returns everything observed while processing it.
  virtual std::vector<Observation> feed(std::string_view message) = 0;
  virtual const LocationGraph& location_graph() const = 0;
  /// Serialization of the subject's global and heap-allocated state.
  virtual std::string addressable_state() const = 0;
  /// Messages the mutator may insert; empty if the subject offers none.
  virtual std::vector<std::string> dictionary() const { return {}; }

  void set_step_budget(std::uint64_t budget) { step_budget_ = budget; }
  std::uint64_t step_budget() const { return step_budget_; }

 private:
  std::uint64_t step_budget_ = kDefaultStepBudget;
};

/// Counts internal steps of one feed() call against the target's budget.
class StepCounter {
 public:
  explicit StepCounter(std::uint64_t budget) : budget_(budget) {}
  /// False once the budget is spent.
  bool tick(std::uint64_t n = 1) {
    used_ += n;
    return used_ <= budget_;
  }
  bool exhausted() const { return used_ > budget_; }

 private:
  std::uint64_t budget_;
  std::uint64_t used_ = 0;
};

// ---------------------------------------------------------------------------
// Execution

struct ExecutionReport {
  Verdict verdict;
  std::vector<Event> trace;
  Progress progress;
  /// The first progress.cursor messages of the input.
  Input prefix;
  std::vector<bool> visited;
  /// Per-location visit counts.
  std::vector<std::uint32_t> hits;
  /// Minimum CFG distance from a visited location to the target (kInfinite if none).
  std::uint32_t distance = kInfinite;
  /// Acceptance distance of the automaton state the progress path ends in.
  std::uint32_t progress_distance = kInfinite;
  std::size_t snapshots = 0;
  bool step_budget_exhausted = false;
};

/// Everything run_input needs besides the target and input.
struct ExecutionContext {
  const BuchiAutomaton* automaton = nullptr;
  const DistanceMap* distances = nullptr;
  const ResolvedMap* map = nullptr;
  MonitorMode mode = MonitorMode::Safety;
};

namespace detail {

// Feeds `in` to a freshly reset target, forwarding events to `sink` until it
// returns false. Returns whether the step budget was exhausted.
template <typename Sink>
bool execute(Target& t, const Input& in, const ResolvedMap& map, bool liveness, std::vector<std::uint32_t>& hits,
             Sink&& sink) {
  t.reset();
  hits.assign(t.location_graph().size(), 0);
  for (std::size_t m = 0; m < in.messages.size(); ++m) {
    for (auto& obs : t.feed(in.messages[m])) {
      switch (obs.kind) {
        case ObservationKind::LocationVisited:
          if (obs.location >= hits.size())
            throw ConfigError("subject contract violation: unknown location id " + std::to_string(obs.location));
          ++hits[obs.location];
          break;
        case ObservationKind::StepBudgetExhausted: return true;
        case ObservationKind::EventFired: {
          if (!map.allowed.count({obs.proposition, obs.location}))
            throw ConfigError("subject contract violation: event '" + obs.proposition + "' at unmapped location " +
                              std::to_string(obs.location));
          hits[obs.location] = std::max<std::uint32_t>(hits[obs.location], 1);
          Event e{obs.proposition, obs.location, static_cast<std::uint32_t>(m + 1), std::nullopt};
          if (liveness && obs.records_state && map.is_loop_header(obs.proposition))
            e.state_hash = fnv1a32(t.addressable_state());
          if (!sink(e)) return false;
          break;
        }
      }
    }
  }
  return false;
}

}  // namespace detail

/// Runs one input through a fresh monitor. `target_distances`, when given, holds
/// each location's CFG distance to the current target location.
inline ExecutionReport run_input(Target& t, const Input& in, const ExecutionContext& ctx,
                                 const std::vector<std::uint32_t>* target_distances = nullptr) {
  Monitor monitor(*ctx.automaton, *ctx.distances, ctx.mode);
  ExecutionReport r;
  r.step_budget_exhausted = detail::execute(t, in, *ctx.map, ctx.mode == MonitorMode::Liveness, r.hits,
                                            [&monitor](const Event& e) {
                                              monitor.observe(e);
                                              return monitor.verdict().running();
                                            });
  r.visited.resize(r.hits.size());
  for (std::size_t l = 0; l < r.hits.size(); ++l) r.visited[l] = r.hits[l] > 0;
  r.verdict = monitor.verdict();
  r.trace = monitor.trace();
  r.progress = monitor.progress();
  r.progress_distance = (*ctx.distances)[r.progress.states.back()];
  r.prefix = in.prefix(r.progress.cursor);
  r.snapshots = monitor.snapshot_count();
  if (target_distances) {
    for (LocationId l = 0; l < r.visited.size(); ++l)
      if (r.visited[l]) r.distance = std::min(r.distance, (*target_distances)[l]);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Lasso validation

struct LassoValidation {
  bool confirmed = false;
  /// Observations of the recurring snapshot after its first one.
  std::size_t recurrences = 0;
  bool used_fallback = false;
};

namespace detail {

inline std::size_t count_snapshot(Target& t, const Input& in, const ExecutionContext& ctx, const LassoWitness& w) {
  const BuchiAutomaton& a = *ctx.automaton;
  std::vector<StateId> frontier{a.initial()};
  std::size_t count = 0;
  std::vector<std::uint32_t> hits;
  execute(t, in, *ctx.map, true, hits, [&](const Event& e) {
    frontier = step(a, frontier, e.proposition);
    if (frontier.empty()) frontier = {a.initial()};
    if (e.location == w.location && e.state_hash == w.recurring_hash &&
        std::binary_search(frontier.begin(), frontier.end(), w.automaton_state))
      ++count;
    return true;
  });
  return count;
}

}  // namespace detail

/// Re-executes the input with the messages that drove the witnessed loop
/// repeated `k` times, and confirms the recurring snapshot comes back each time.
/// A loop that lives inside a single message is re-run with a doubled step budget.
inline LassoValidation validate_lasso(Target& t, const Input& in, const std::vector<Event>& trace,
                                      const LassoWitness& w, const ExecutionContext& ctx, std::size_t k = 3) {
  LassoValidation v;
  if (w.loop_end >= trace.size() || w.loop_start >= w.loop_end) return v;
  // Events at loop_start and loop_end fired while processing these (0-based) messages.
  const std::size_t first = trace[w.loop_start].input_cursor - 1;
  const std::size_t last = trace[w.loop_end].input_cursor - 1;
  if (last > first) {
    Input repeated;
    for (std::size_t i = 0; i < first; ++i) repeated.messages.push_back(in.messages[i]);
    for (std::size_t rep = 0; rep < k; ++rep)
      for (std::size_t i = first; i < last; ++i) repeated.messages.push_back(in.messages[i]);
    for (std::size_t i = last; i < in.messages.size(); ++i) repeated.messages.push_back(in.messages[i]);
    std::size_t seen = detail::count_snapshot(t, repeated, ctx, w);
    v.recurrences = seen > 0 ? seen - 1 : 0;
  } else {
    v.used_fallback = true;
    const std::uint64_t budget = t.step_budget();
    t.set_step_budget(budget * 2);
    std::size_t seen = detail::count_snapshot(t, in, ctx, w);
    t.set_step_budget(budget);
    v.recurrences = seen > 0 ? seen - 1 : 0;
  }
  v.confirmed = v.recurrences >= k;
  return v;
}

}  // namespace ltlfuzz
