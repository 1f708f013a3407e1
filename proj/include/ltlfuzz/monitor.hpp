#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "ltlfuzz/buchi.hpp"

namespace ltlfuzz {

using LocationId = std::uint32_t;

struct Event {
  std::string proposition;
  LocationId location = 0;
  /// Input messages delivered when the event fired, counting the one being processed.
  std::uint32_t input_cursor = 0;
  std::optional<std::uint32_t> state_hash;

  friend bool operator==(const Event&, const Event&) = default;
};

enum class MonitorMode { Safety, Liveness };

struct LassoWitness {
  std::size_t loop_start = 0;
  std::size_t loop_end = 0;
  std::uint32_t recurring_hash = 0;
  StateId automaton_state = 0;
  LocationId location = 0;

  friend bool operator==(const LassoWitness&, const LassoWitness&) = default;
};

enum class VerdictKind { Running, SafetyViolation, LivenessViolation };

struct Verdict {
  VerdictKind kind = VerdictKind::Running;
  /// Trace length at which a safety violation was detected.
  std::size_t prefix_length = 0;
  std::optional<LassoWitness> lasso;

  bool running() const { return kind == VerdictKind::Running; }
  friend bool operator==(const Verdict&, const Verdict&) = default;
};

class MonitorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Witnessed automaton path plus the input prefix length that drove it.
struct Progress {
  std::vector<StateId> states;
  std::uint32_t cursor = 0;

  friend bool operator==(const Progress&, const Progress&) = default;
};

/// Tracks one execution against the automaton of the negated property.
///
/// The frontier keeps, per reachable automaton state, one back-pointer path:
/// the shortest (self-loops do not lengthen it), then the one whose predecessor
/// has the smaller acceptance distance, then the lower predecessor index. An
/// event that kills every run resets the frontier to the initial state and
/// forgets recorded snapshots.
class Monitor {
 public:
  Monitor(const BuchiAutomaton& automaton, const DistanceMap& distances, MonitorMode mode)
      : automaton_(&automaton), distances_(&distances), mode_(mode) {
    reset_frontier();
  }

  const Verdict& verdict() const { return verdict_; }
  const std::vector<Event>& trace() const { return trace_; }
  MonitorMode mode() const { return mode_; }
  std::size_t snapshot_count() const { return snapshots_.size(); }
  std::size_t resets() const { return resets_; }

  std::vector<StateId> frontier() const {
    std::vector<StateId> out;
    for (const auto& e : frontier_) out.push_back(e.state);
    return out;
  }

  void observe(const Event& e) {
    if (!verdict_.running()) throw MonitorError("monitor already reached a verdict");
    auto id = automaton_->prop_id(e.proposition);
    if (!id) throw MonitorError("event proposition '" + e.proposition + "' is not in the automaton universe");
    const std::uint64_t bit = std::uint64_t{1} << *id;
    trace_.push_back(e);

    std::map<StateId, Entry> next;
    for (const auto& from : frontier_) {
      for (const auto& t : automaton_->transitions(from.state)) {
        if (!t.guard.satisfied_by(bit)) continue;
        Entry cand{t.to, t.to == from.state ? from.path : extend(from.path, t.to, e.input_cursor), from.state};
        auto [it, inserted] = next.try_emplace(t.to, cand);
        if (!inserted && better(cand, it->second)) it->second = cand;
      }
    }
    if (next.empty()) {
      reset_frontier();
      ++resets_;
      return;
    }
    frontier_.clear();
    for (auto& [s, entry] : next) frontier_.push_back(std::move(entry));

    if (mode_ == MonitorMode::Safety) {
      for (const auto& f : frontier_) {
        if (automaton_->is_accepting(f.state)) {
          verdict_ = Verdict{VerdictKind::SafetyViolation, trace_.size(), std::nullopt};
          return;
        }
      }
      return;
    }
    if (!e.state_hash) return;
    const std::size_t index = trace_.size() - 1;
    for (const auto& f : frontier_) {
      if (!automaton_->is_accepting(f.state)) continue;
      Key key{f.state, *e.state_hash, e.location};
      auto [it, inserted] = snapshots_.try_emplace(key, index);
      if (inserted) continue;
      if (loop_returns(f.state, it->second, index)) {
        verdict_ = Verdict{VerdictKind::LivenessViolation, trace_.size(),
                           LassoWitness{it->second, index, *e.state_hash, f.state, e.location}};
        return;
      }
    }
  }

  /// Path from the initial state to the frontier state closest to acceptance.
  Progress progress() const {
    const Entry* best = nullptr;
    for (const auto& f : frontier_) {
      if (!best) {
        best = &f;
        continue;
      }
      auto key = [this](const Entry& x) { return std::make_tuple((*distances_)[x.state], length(x.path), x.state); };
      if (key(f) < key(*best)) best = &f;
    }
    Progress p;
    p.cursor = best->path ? best->path->cursor : 0;
    for (auto node = best->path; node; node = node->parent) p.states.push_back(node->state);
    p.states.push_back(automaton_->initial());
    std::reverse(p.states.begin(), p.states.end());
    return p;
  }

  std::uint32_t progress_distance() const {
    std::uint32_t d = kInfinite;
    for (const auto& f : frontier_) d = std::min(d, (*distances_)[f.state]);
    return d;
  }

 private:
  // Path below the initial state; nullptr is the bare initial state.
  struct PathNode {
    StateId state;
    std::uint32_t cursor;
    std::uint32_t length;
    std::shared_ptr<const PathNode> parent;
  };
  using Path = std::shared_ptr<const PathNode>;

  struct Entry {
    StateId state;
    Path path;
    StateId pred;
  };

  using Key = std::tuple<StateId, std::uint32_t, LocationId>;

  static std::uint32_t length(const Path& p) { return p ? p->length : 0; }

  static Path extend(const Path& p, StateId s, std::uint32_t cursor) {
    return std::make_shared<const PathNode>(PathNode{s, cursor, length(p) + 1, p});
  }

  bool better(const Entry& a, const Entry& b) const {
    return std::make_tuple(length(a.path), (*distances_)[a.pred], a.pred) <
           std::make_tuple(length(b.path), (*distances_)[b.pred], b.pred);
  }

  void reset_frontier() {
    frontier_.assign(1, Entry{automaton_->initial(), nullptr, automaton_->initial()});
    snapshots_.clear();
  }

  // Replays events (start, end] from `state` and checks that `state` is reachable again.
  bool loop_returns(StateId state, std::size_t start, std::size_t end) const {
    std::vector<StateId> f{state};
    for (std::size_t i = start + 1; i <= end && !f.empty(); ++i)
      f = step(*automaton_, f, trace_[i].proposition);
    return std::binary_search(f.begin(), f.end(), state);
  }

  const BuchiAutomaton* automaton_;
  const DistanceMap* distances_;
  MonitorMode mode_;
  std::vector<Entry> frontier_;
  std::vector<Event> trace_;
  std::map<Key, std::size_t> snapshots_;
  Verdict verdict_;
  std::size_t resets_ = 0;
};

// ---------------------------------------------------------------------------
// Trace dump format

inline std::string format_hash(std::uint32_t h) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", h);
  return buf;
}

inline std::string verdict_to_string(const Verdict& v) {
  switch (v.kind) {
    case VerdictKind::Running: return "running";
    case VerdictKind::SafetyViolation: return "safety prefix=" + std::to_string(v.prefix_length);
    case VerdictKind::LivenessViolation:
      return "liveness loop=" + std::to_string(v.lasso->loop_start) + ".." + std::to_string(v.lasso->loop_end) +
             " hash=" + format_hash(v.lasso->recurring_hash) + " state=" + std::to_string(v.lasso->automaton_state);
  }
  return "";
}

using LocationNamer = std::function<std::string(LocationId)>;
using LocationResolver = std::function<std::optional<LocationId>(const std::string&)>;

inline std::string dump_event(std::size_t index, const Event& e, const LocationNamer& name) {
  std::string line = std::to_string(index) + " " + e.proposition + " @" + name(e.location) +
                     " cursor=" + std::to_string(e.input_cursor);
  if (e.state_hash) line += " hash=" + format_hash(*e.state_hash);
  return line;
}

inline std::string dump_trace(const std::vector<Event>& trace, const Verdict& v, const LocationNamer& name) {
  std::string out;
  for (std::size_t i = 0; i < trace.size(); ++i) out += dump_event(i, trace[i], name) + "\n";
  out += "verdict: " + verdict_to_string(v) + "\n";
  return out;
}

class TraceFormatError : public std::runtime_error {
 public:
  TraceFormatError(const std::string& what, std::size_t line)
      : std::runtime_error("trace line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Reads the event lines of a trace dump. Blank lines and the `verdict:` line are skipped.
inline std::vector<Event> parse_trace(const std::string& text, const LocationResolver& resolve) {
  std::vector<Event> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto parse_uint = [](std::string_view s, int base, std::uint32_t& v) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
    return ec == std::errc() && p == s.data() + s.size();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line.rfind("verdict:", 0) == 0) continue;
    std::istringstream fields(line);
    std::string index, prop, loc, cursor, hash, extra;
    if (!(fields >> index >> prop >> loc >> cursor)) throw TraceFormatError("expected '<index> <prop> @<loc> cursor=<n>'", lineno);
    fields >> hash;
    if (fields >> extra) throw TraceFormatError("unexpected trailing field '" + extra + "'", lineno);
    std::uint32_t idx = 0;
    if (!parse_uint(index, 10, idx) || idx != out.size()) throw TraceFormatError("bad event index '" + index + "'", lineno);
    if (loc.size() < 2 || loc[0] != '@') throw TraceFormatError("bad location '" + loc + "'", lineno);
    Event e;
    e.proposition = prop;
    auto id = resolve(loc.substr(1));
    if (!id) throw TraceFormatError("unknown location '" + loc.substr(1) + "'", lineno);
    e.location = *id;
    if (cursor.rfind("cursor=", 0) != 0 || !parse_uint(std::string_view(cursor).substr(7), 10, e.input_cursor))
      throw TraceFormatError("bad cursor field '" + cursor + "'", lineno);
    if (!hash.empty()) {
      std::uint32_t h = 0;
      if (hash.rfind("hash=0x", 0) != 0 || hash.size() > 15 || !parse_uint(std::string_view(hash).substr(7), 16, h))
        throw TraceFormatError("bad hash field '" + hash + "'", lineno);
      e.state_hash = h;
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace ltlfuzz
