#pragma once

// Counterexample-guided fuzz loop: a pool of progress tuples (input prefix,
// automaton path), fitness-proportional prefix selection, progressive
// proposition targeting, distance-driven energy and prefix-pinned mutation.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ltlfuzz/buchi.hpp"
#include "ltlfuzz/harness.hpp"
#include "ltlfuzz/ltl.hpp"
#include "ltlfuzz/monitor.hpp"

namespace ltlfuzz {

using Rng = std::mt19937_64;

namespace detail {
inline std::uint64_t below(Rng& rng, std::uint64_t n) { return n ? rng() % n : 0; }
inline double unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
}  // namespace detail

inline std::string distance_to_string(std::uint32_t d) { return d == kInfinite ? "inf" : std::to_string(d); }

// ---------------------------------------------------------------------------
// Progress tuples and the prefix pool

struct ProgressTuple {
  Input prefix;
  std::vector<StateId> states;
  /// The execution that first witnessed this progress; mutation starts from it.
  Input seed;
  std::uint64_t prefix_hash = 0;
  std::size_t selected = 0;
  std::size_t discoveries = 0;
  std::size_t failed_windows = 0;
  /// Halved each time the tuple's windows repeatedly time out.
  double weight = 1.0;
  bool retired = false;

  StateId last() const { return states.back(); }

  std::string key() const {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(prefix_hash));
    std::string k = std::string(buf) + ":";
    for (std::size_t i = 0; i < states.size(); ++i) k += (i ? "." : "") + std::to_string(states[i]);
    return k;
  }
};

struct Fraction {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Fraction&, const Fraction&) = default;
};

/// l_s/(l_s+l_a) + 1/max(l_i,1), reduced. Requires finite l_a.
inline Fraction fitness_exact(std::size_t l_s, std::uint32_t l_a, std::size_t l_i) {
  const std::uint64_t total = l_s + l_a;
  const std::uint64_t li = std::max<std::size_t>(l_i, 1);
  if (total == 0) return {1, li};
  Fraction f{l_s * li + total, total * li};
  const std::uint64_t g = std::gcd(f.num, f.den);
  return {f.num / g, f.den / g};
}

inline double fitness(std::size_t l_s, std::uint32_t l_a, std::size_t l_i) {
  return fitness_exact(l_s, l_a, l_i).value();
}

inline double fitness(const ProgressTuple& t, const DistanceMap& dm) {
  return fitness(t.states.size(), dm[t.last()], t.prefix.size());
}

/// Deduplicated set of progress tuples keyed by (hash(prefix), state path).
/// Index 0 is always the seed tuple: empty prefix, path [initial].
class PrefixPool {
 public:
  PrefixPool(const BuchiAutomaton& a, const DistanceMap& dm, Input initial_seed = {}, std::size_t cap = 4096)
      : automaton_(&a), distances_(&dm), cap_(std::max<std::size_t>(cap, 1)) {
    insert(Input{}, {a.initial()}, std::move(initial_seed));
  }

  std::size_t size() const { return tuples_.size(); }
  const ProgressTuple& operator[](std::size_t i) const { return tuples_.at(i); }
  ProgressTuple& operator[](std::size_t i) { return tuples_.at(i); }
  const std::vector<ProgressTuple>& tuples() const { return tuples_; }

  bool contains(std::uint64_t prefix_hash, const std::vector<StateId>& states) const {
    return keys_.count({prefix_hash, states}) > 0;
  }

  ProgressTuple* find(const std::string& key) {
    for (auto& t : tuples_)
      if (t.key() == key) return &t;
    return nullptr;
  }

  /// Adds a tuple unless its key is already present. Returns the new tuple's key.
  std::optional<std::string> insert(Input prefix, std::vector<StateId> states, Input seed) {
    check_path(states);
    const std::uint64_t h = input_hash(prefix);
    if (!keys_.insert({h, states}).second) return std::nullopt;
    ProgressTuple t;
    t.prefix = std::move(prefix);
    t.states = std::move(states);
    t.seed = std::move(seed);
    t.prefix_hash = h;
    tuples_.push_back(std::move(t));
    std::string key = tuples_.back().key();
    if (tuples_.size() > cap_) evict();
    return key;
  }

 private:
  void check_path(const std::vector<StateId>& states) const {
    if (states.empty() || states.front() != automaton_->initial())
      throw std::logic_error("progress path must start at the initial state");
    for (std::size_t i = 1; i < states.size(); ++i) {
      const auto& ts = automaton_->transitions(states[i - 1]);
      if (std::none_of(ts.begin(), ts.end(), [&](const Transition& t) { return t.to == states[i]; }))
        throw std::logic_error("progress path is not transition-connected");
    }
  }

  // Drops the lowest-fitness tuple other than the seed.
  void evict() {
    std::size_t worst = 0;
    double worst_f = 0;
    for (std::size_t i = 1; i < tuples_.size(); ++i) {
      double f = distances_->finite(tuples_[i].last()) ? fitness(tuples_[i], *distances_) * tuples_[i].weight : -1;
      if (worst == 0 || f < worst_f) worst = i, worst_f = f;
    }
    keys_.erase({tuples_[worst].prefix_hash, tuples_[worst].states});
    tuples_.erase(tuples_.begin() + static_cast<std::ptrdiff_t>(worst));
  }

  const BuchiAutomaton* automaton_;
  const DistanceMap* distances_;
  std::size_t cap_;
  std::vector<ProgressTuple> tuples_;
  std::set<std::pair<std::uint64_t, std::vector<StateId>>> keys_;
};

/// Fitness-proportional draw over selectable tuples, scanning in insertion order.
/// Tuples whose last state cannot reach acceptance are never drawn.
inline std::size_t select_prefix(const PrefixPool& pool, const DistanceMap& dm, Rng& rng) {
  std::vector<double> w(pool.size(), 0.0);
  double total = 0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& t = pool[i];
    if (t.retired || !dm.finite(t.last())) continue;
    w[i] = fitness(t, dm) * t.weight;
    total += w[i];
  }
  if (total <= 0) return 0;
  double r = detail::unit(rng) * total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] <= 0) continue;
    if (r < w[i]) return i;
    r -= w[i];
  }
  for (std::size_t i = w.size(); i-- > 0;)
    if (w[i] > 0) return i;
  return 0;
}

// ---------------------------------------------------------------------------
// Target selection

struct FuzzTarget {
  std::string proposition;
  LocationId location = 0;

  friend bool operator==(const FuzzTarget&, const FuzzTarget&) = default;
};

/// Propositions whose events move `s` toward acceptance (or keep an accepting
/// `s` on its loop), sorted. Guards without a positive literal stand for
/// loop-header propositions, or any mapped proposition when there are none.
inline std::vector<std::string> target_propositions(const BuchiAutomaton& a, const DistanceMap& dm, StateId s,
                                                    const ResolvedMap& map) {
  std::vector<const Transition*> chosen;
  for (const auto& t : a.transitions(s)) {
    if (dm[s] > 0 ? dm[t.to] < dm[s] : t.to == s) chosen.push_back(&t);
  }
  // An accepting state that only loops back through other states.
  if (chosen.empty() && dm[s] == 0)
    for (const auto& t : a.transitions(s))
      if (dm.finite(t.to)) chosen.push_back(&t);

  std::set<std::string> props;
  const auto& names = a.ap_universe();
  for (const Transition* t : chosen) {
    if (t->guard.positive) {
      props.insert(names[std::countr_zero(t->guard.positive)]);
      continue;
    }
    auto allowed = [&](const std::string& p) {
      auto id = a.prop_id(p);
      return id && !(t->guard.negative >> *id & 1);
    };
    bool any = false;
    for (const auto& l : map.loop_headers)
      if (allowed(l)) props.insert(l), any = true;
    if (any) continue;
    for (const auto& [p, _] : map.locations)
      if (allowed(p)) props.insert(p);
  }
  std::vector<std::string> out;
  for (const auto& p : props)
    if (map.locations.count(p)) out.push_back(p);
  return out;
}

/// Picks a proposition uniformly from target_propositions, then one of its locations.
inline std::optional<FuzzTarget> select_target(const BuchiAutomaton& a, const DistanceMap& dm, StateId s,
                                               const ResolvedMap& map, Rng& rng) {
  if (!dm.finite(s)) return std::nullopt;
  auto props = target_propositions(a, dm, s, map);
  if (props.empty()) return std::nullopt;
  const std::string& p = props[detail::below(rng, props.size())];
  const auto& locs = map.locations.at(p);
  return FuzzTarget{p, locs[detail::below(rng, locs.size())]};
}

// ---------------------------------------------------------------------------
// Mutation

struct MutationLimits {
  std::size_t max_messages = 64;
  std::size_t max_message_size = 1024;
  std::size_t max_input_size = kDefaultMaxInputSize;
};

class Mutator {
 public:
  explicit Mutator(std::vector<std::string> dictionary = {}, MutationLimits limits = {})
      : dictionary_(std::move(dictionary)), limits_(limits) {}

  const MutationLimits& limits() const { return limits_; }

  /// Mutates the part of `seed` after |prefix| messages `rounds` times, then
  /// pins `prefix` in front. `splice_with` donates messages for splicing.
  Input generate(const Input& seed, const Input& prefix, std::uint32_t rounds, Rng& rng,
                 const Input* splice_with = nullptr) const {
    std::vector<std::string> suffix;
    if (seed.size() > prefix.size())
      suffix.assign(seed.messages.begin() + static_cast<std::ptrdiff_t>(prefix.size()), seed.messages.end());
    for (std::uint32_t r = 0; r < rounds; ++r) mutate_once(suffix, rng, splice_with);

    Input out = prefix;
    std::size_t bytes = out.serialized_size();
    for (auto& m : suffix) {
      if (out.size() >= std::max(limits_.max_messages, prefix.size())) break;
      if (m.size() > limits_.max_message_size) m.resize(limits_.max_message_size);
      if (bytes + 4 + m.size() > limits_.max_input_size) break;
      bytes += 4 + m.size();
      out.messages.push_back(std::move(m));
    }
    return out;
  }

  void mutate_once(std::vector<std::string>& msgs, Rng& rng, const Input* splice_with) const {
    using detail::below;
    const std::size_t n = msgs.size();
    switch (n == 0 ? (below(rng, 2) ? 4 : 7) : below(rng, 9)) {
      case 0: {  // bit flip
        auto& m = msgs[below(rng, n)];
        if (m.empty()) break;
        m[below(rng, m.size())] ^= static_cast<char>(1u << below(rng, 8));
        break;
      }
      case 1: {  // interesting value, decimal if the message has a number
        static constexpr const char* numbers[] = {"0",   "1",    "7",    "8",     "9",     "16",         "64",
                                                  "255", "256",  "1000", "1024",  "4096",  "65535",      "65536",
                                                  "-1",  "-128", "127",  "32768", "99999", "2147483647", "4294967296"};
        static constexpr unsigned char bytes[] = {0x00, 0x01, 0x7f, 0x80, 0xff, ' ', '\n', '-', '0', '9'};
        auto& m = msgs[below(rng, n)];
        auto digit = std::find_if(m.begin(), m.end(), [](char c) { return c >= '0' && c <= '9'; });
        if (digit != m.end() && below(rng, 4)) {
          auto end = std::find_if(digit, m.end(), [](char c) { return c < '0' || c > '9'; });
          m.replace(digit, end, numbers[below(rng, std::size(numbers))]);
        } else if (!m.empty()) {
          m[below(rng, m.size())] = static_cast<char>(bytes[below(rng, std::size(bytes))]);
        }
        break;
      }
      case 2: {  // block duplicate
        std::size_t at = below(rng, n), len = 1 + below(rng, std::min<std::size_t>(4, n - at));
        std::vector<std::string> block(msgs.begin() + at, msgs.begin() + at + len);
        msgs.insert(msgs.begin() + at + len, block.begin(), block.end());
        break;
      }
      case 3: {  // block delete
        std::size_t at = below(rng, n), len = 1 + below(rng, std::min<std::size_t>(4, n - at));
        msgs.erase(msgs.begin() + at, msgs.begin() + at + len);
        break;
      }
      case 4:  // dictionary insertion
        msgs.insert(msgs.begin() + below(rng, n + 1), random_message(rng));
        break;
      case 5:  // dictionary replacement
        msgs[below(rng, n)] = random_message(rng);
        break;
      case 6: {  // truncation
        auto& m = msgs[below(rng, n)];
        if (!m.empty()) m.resize(below(rng, m.size()));
        break;
      }
      case 7: {  // splice with another seed's tail
        if (!splice_with || splice_with->empty()) {
          msgs.insert(msgs.begin() + below(rng, n + 1), random_message(rng));
          break;
        }
        std::size_t cut = below(rng, n + 1), from = below(rng, splice_with->size());
        msgs.resize(cut);
        msgs.insert(msgs.end(), splice_with->messages.begin() + static_cast<std::ptrdiff_t>(from),
                    splice_with->messages.end());
        break;
      }
      default: {  // printable byte insertion
        auto& m = msgs[below(rng, n)];
        m.insert(m.begin() + below(rng, m.size() + 1), static_cast<char>(' ' + below(rng, 95)));
        break;
      }
    }
  }

 private:
  std::string random_message(Rng& rng) const {
    if (!dictionary_.empty()) return dictionary_[detail::below(rng, dictionary_.size())];
    std::string m(1 + detail::below(rng, 8), ' ');
    for (auto& c : m) c = static_cast<char>(' ' + detail::below(rng, 95));
    return m;
  }

  std::vector<std::string> dictionary_;
  MutationLimits limits_;
};

inline Input generate_input(const Input& seed, const Input& prefix, std::uint32_t rounds, Rng& rng,
                            const std::vector<std::string>& dictionary = {}, const Input* splice_with = nullptr) {
  return Mutator(dictionary).generate(seed, prefix, rounds, rng, splice_with);
}

// ---------------------------------------------------------------------------
// Power schedule

struct ScheduleParams {
  /// Exponent at the start of a target window; grows as the window cools.
  double annealing_exponent = 0.05;
  /// Temperature is exp(-cooling * elapsed) for elapsed in [0, 1].
  double cooling = 5.0;
  std::uint32_t max_energy = 512;
};

/// Finite distances observed in the current target window.
class DistanceHistory {
 public:
  void add(std::uint32_t d) {
    if (d == kInfinite) return;
    max_ = seen_ ? std::max(max_, d) : d;
    seen_ = true;
  }
  bool empty() const { return !seen_; }
  std::uint32_t max() const { return max_; }
  void clear() { seen_ = false, max_ = 0; }

 private:
  bool seen_ = false;
  std::uint32_t max_ = 0;
};

/// Children to generate from a seed at distance `d`, `elapsed` into the window.
inline std::uint32_t power_schedule(const DistanceHistory& history, std::uint32_t d, double elapsed,
                                    const ScheduleParams& p = {}) {
  double norm = 1.0;
  if (d != kInfinite) {
    const std::uint32_t top = history.empty() ? d : std::max(history.max(), d);
    norm = top == 0 ? 0.0 : static_cast<double>(d) / top;
  }
  const double temperature = std::exp(-p.cooling * std::clamp(elapsed, 0.0, 1.0));
  const double e = std::round(p.max_energy * std::pow(1.0 - norm, p.annealing_exponent / temperature));
  return static_cast<std::uint32_t>(std::clamp(e, 1.0, static_cast<double>(p.max_energy)));
}

// ---------------------------------------------------------------------------
// Campaign

struct CampaignConfig {
  double total_time = 300;
  double target_time = 20;
  std::uint64_t rng_seed = 0;
  bool liveness = false;
  bool unguided = false;
  ScheduleParams schedule;
  MutationLimits limits;
  /// Havoc rounds per child are drawn from [1, max_havoc_rounds].
  std::uint32_t max_havoc_rounds = 8;
  /// Children per corpus entry in unguided mode.
  std::uint32_t unguided_energy = 256;
  /// Virtual seconds charged per execution; the campaign clock when wall_clock is off.
  double exec_cost = 1e-3;
  bool wall_clock = false;
  /// Stop after this many executions (0 = no limit).
  std::uint64_t max_executions = 0;
  std::size_t validation_k = 3;
  std::size_t retire_after = 3;
  std::size_t pool_cap = 4096;
  std::size_t window_queue_cap = 256;
  double stats_interval = 5;
  unsigned workers = 1;
  std::uint64_t step_budget = kDefaultStepBudget;

  static CampaignConfig production_preset() {
    CampaignConfig c;
    c.total_time = 24 * 3600;
    c.target_time = 45 * 60;
    return c;
  }

  void validate() const {
    if (!(target_time > 0) || !(total_time > 0) || target_time > total_time)
      throw ConfigError("budgets must satisfy 0 < target-time <= total-time");
    if (schedule.max_energy == 0 || max_havoc_rounds == 0 || unguided_energy == 0)
      throw ConfigError("energy and havoc limits must be positive");
    if (!(exec_cost > 0)) throw ConfigError("execution cost must be positive");
    if (workers == 0) throw ConfigError("at least one worker is required");
    if (validation_k == 0) throw ConfigError("validation repetition count must be positive");
  }
};

class EmptyLanguageError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

struct Counterexample {
  Input input;
  std::vector<Event> trace;
  Verdict verdict;
  std::vector<StateId> automaton_path;
  /// Safety: replay reproduced the verdict. Liveness: lasso validation passed too.
  bool validated = false;
  std::optional<LassoValidation> validation;
  std::size_t snapshots = 0;
  std::uint64_t execution = 0;
  double time = 0;
};

struct FuzzOutcome {
  std::optional<Counterexample> counterexample;
  std::uint64_t executions = 0;
  double elapsed = 0;
  double wall_seconds = 0;
  std::size_t windows = 0;
  std::size_t spurious = 0;
  std::size_t nondeterministic = 0;
  std::uint32_t best_distance = kInfinite;
  std::size_t locations_covered = 0;
  std::size_t corpus_size = 0;
  std::vector<ProgressTuple> pool;
};

/// Where campaign output goes. Both streams are optional.
struct CampaignIo {
  std::ostream* log = nullptr;
  std::ostream* stats = nullptr;
  /// Free-form description written into the log header.
  std::string label;
};

using TargetFactory = std::function<std::unique_ptr<Target>()>;

namespace detail {

// Per-location hit counts folded into AFL-style buckets.
inline std::uint8_t hit_bucket(std::uint32_t hits) {
  if (hits == 0) return 0;
  if (hits <= 3) return static_cast<std::uint8_t>(1u << (hits - 1));
  if (hits <= 7) return 8;
  if (hits <= 15) return 16;
  if (hits <= 31) return 32;
  if (hits <= 127) return 64;
  return 128;
}

class Campaign {
 public:
  Campaign(TargetFactory make, const BuchiAutomaton& property_automaton, const PropositionMap& map,
           const CampaignConfig& cfg, const CampaignIo& io, std::vector<Input> seeds)
      : make_(std::move(make)), cfg_(cfg), io_(io), seeds_(std::move(seeds)) {
    cfg_.validate();
    auto probe = make_();
    std::set<std::string> aps(property_automaton.ap_universe().begin(), property_automaton.ap_universe().end());
    map_ = resolve_map(map, probe->location_graph(), aps);
    std::vector<std::string> extra;
    for (const auto& p : map.propositions())
      if (!aps.count(p)) extra.push_back(p);
    if (aps.size() + extra.size() > kMaxPropositions)
      throw ConfigError("at most " + std::to_string(kMaxPropositions) + " propositions are supported");
    automaton_ = property_automaton.with_universe(extra);
    distances_ = accepting_distance(automaton_);
    if (empty_language(automaton_)) throw EmptyLanguageError("property automaton has an empty language");
    if (seeds_.empty()) seeds_.push_back(Input{});
    ctx_ = ExecutionContext{&automaton_, &distances_, &map_, cfg_.liveness ? MonitorMode::Liveness : MonitorMode::Safety};
    pool_.emplace(automaton_, distances_, seeds_.front(), cfg_.pool_cap);
    coverage_.assign(probe->location_graph().size(), 0);
    next_stats_ = cfg_.stats_interval;
  }

  const BuchiAutomaton& automaton() const { return automaton_; }

  FuzzOutcome run() {
    wall_start_ = std::chrono::steady_clock::now();
    if (io_.log) {
      *io_.log << "# campaign " << (io_.label.empty() ? "" : io_.label + " ")
               << "mode=" << (cfg_.unguided ? "unguided" : "guided") << " liveness=" << (cfg_.liveness ? 1 : 0)
               << " rng_seed=" << cfg_.rng_seed << " total_time=" << cfg_.total_time
               << " target_time=" << cfg_.target_time << " workers=" << cfg_.workers << "\n";
    }
    if (cfg_.workers == 1) {
      worker(0);
    } else {
      std::vector<std::thread> threads;
      for (unsigned i = 0; i < cfg_.workers; ++i) threads.emplace_back([this, i] { worker(i); });
      for (auto& t : threads) t.join();
    }
    outcome_.executions = executions_;
    outcome_.elapsed = now();
    outcome_.wall_seconds = wall_elapsed();
    outcome_.pool = pool_->tuples();
    outcome_.locations_covered = static_cast<std::size_t>(std::count_if(coverage_.begin(), coverage_.end(), [](auto b) { return b != 0; }));
    outcome_.corpus_size = corpus_.size();
    write_stats(true);
    return outcome_;
  }

 private:
  struct Worker {
    std::unique_ptr<Target> target;
    Rng rng;
    Mutator mutator;
  };

  struct QueueEntry {
    Input input;
    std::uint32_t distance = kInfinite;
  };

  double wall_elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start_).count();
  }
  double now() const { return cfg_.wall_clock ? wall_elapsed() : static_cast<double>(executions_) * cfg_.exec_cost; }

  void worker(unsigned id) {
    Worker w{make_(), Rng(cfg_.rng_seed + id * 0x9E3779B97F4A7C15ull), Mutator()};
    w.target->set_step_budget(cfg_.step_budget);
    w.mutator = Mutator(w.target->dictionary(), cfg_.limits);
    if (cfg_.unguided)
      unguided_loop(w);
    else
      guided_loop(w);
  }

  // -- guided -------------------------------------------------------------

  void guided_loop(Worker& w) {
    for (;;) {
      std::string key;
      Input prefix;
      std::vector<StateId> states;
      std::vector<QueueEntry> queue;
      std::optional<FuzzTarget> target;
      {
        std::lock_guard lock(mu_);
        if (stopped_) return;
        std::size_t i = select_prefix(*pool_, distances_, w.rng);
        auto& t = (*pool_)[i];
        target = select_target(automaton_, distances_, t.last(), map_, w.rng);
        if (!target) {
          // Dead end; the seed tuple always stays selectable.
          if (i != 0) t.retired = true;
          else stopped_ = true;
          continue;
        }
        ++t.selected;
        ++outcome_.windows;
        key = t.key();
        prefix = t.prefix;
        states = t.states;
        queue.push_back({t.seed, kInfinite});
        if (i == 0)
          for (std::size_t s = 1; s < seeds_.size(); ++s) queue.push_back({seeds_[s], kInfinite});
      }
      const std::uint32_t start_distance = distances_[states.back()];
      const auto& tdist = target_distances(w, target->location);
      const std::string label = "tuple=" + key + " target=" + target->proposition + "@" +
                                w.target->location_graph().name(target->location);

      DistanceHistory history;
      std::vector<bool> window_cov(coverage_.size(), false);
      bool advanced = false;
      const double window_start = locked_now();
      // Calibrate the starting entries.
      for (auto& q : queue) {
        auto r = evaluate(w, q.input, label, &tdist);
        if (!r) return;
        q.distance = r->distance;
        history.add(r->distance);
        for (std::size_t l = 0; l < r->visited.size(); ++l) window_cov[l] = window_cov[l] || r->visited[l];
        advanced = advanced || note_progress(*r, q.input, key, start_distance);
      }
      for (std::size_t qi = 0; !advanced; ++qi) {
        const QueueEntry parent = queue[qi % queue.size()];
        const double elapsed = (locked_now() - window_start) / cfg_.target_time;
        if (elapsed >= 1) break;
        const std::uint32_t energy = power_schedule(history, parent.distance, elapsed, cfg_.schedule);
        for (std::uint32_t e = 0; e < energy && !advanced; ++e) {
          Input donor = splice_donor(w);
          Input child = w.mutator.generate(parent.input, prefix,
                                           1 + static_cast<std::uint32_t>(detail::below(w.rng, cfg_.max_havoc_rounds)),
                                           w.rng, &donor);
          auto r = evaluate(w, child, label, &tdist);
          if (!r) return;
          history.add(r->distance);
          bool novel = r->distance < parent.distance;
          for (std::size_t l = 0; l < r->visited.size(); ++l)
            if (r->visited[l] && !window_cov[l]) window_cov[l] = true, novel = true;
          advanced = note_progress(*r, child, key, start_distance);
          if (novel && queue.size() < cfg_.window_queue_cap) queue.push_back({std::move(child), r->distance});
          if ((locked_now() - window_start) >= cfg_.target_time) break;
        }
      }
      std::lock_guard lock(mu_);
      if (auto* t = pool_->find(key); t && !advanced && ++t->failed_windows >= cfg_.retire_after) {
        t->weight *= 0.5;
        t->failed_windows = 0;
      }
    }
  }

  // Records the run's progress tuple; true if it gets closer to acceptance than `from`.
  bool note_progress(const ExecutionReport& r, const Input& input, const std::string& parent_key,
                     std::uint32_t from) {
    std::lock_guard lock(mu_);
    if (!pool_->insert(r.prefix, r.progress.states, input)) return false;
    if (auto* t = pool_->find(parent_key)) ++t->discoveries;
    return r.progress_distance < from;
  }

  const std::vector<std::uint32_t>& target_distances(Worker& w, LocationId loc) {
    std::lock_guard lock(mu_);
    auto it = target_distances_.find(loc);
    if (it == target_distances_.end())
      it = target_distances_.emplace(loc, w.target->location_graph().distances_to(loc)).first;
    return it->second;
  }

  Input splice_donor(Worker& w) {
    std::lock_guard lock(mu_);
    if (cfg_.unguided) return corpus_.empty() ? Input{} : corpus_[detail::below(w.rng, corpus_.size())];
    return (*pool_)[detail::below(w.rng, pool_->size())].seed;
  }

  double locked_now() {
    std::lock_guard lock(mu_);
    return now();
  }

  // -- unguided -----------------------------------------------------------

  void unguided_loop(Worker& w) {
    {
      std::lock_guard lock(mu_);
      if (corpus_.empty()) corpus_ = seeds_;
    }
    for (;;) {
      Input parent;
      {
        std::lock_guard lock(mu_);
        if (stopped_) return;
        parent = corpus_[detail::below(w.rng, corpus_.size())];
      }
      for (std::uint32_t e = 0; e < cfg_.unguided_energy; ++e) {
        Input donor = splice_donor(w);
        Input child = w.mutator.generate(
            parent, Input{}, 1 + static_cast<std::uint32_t>(detail::below(w.rng, cfg_.max_havoc_rounds)), w.rng,
            &donor);
        auto r = evaluate(w, child, "tuple=- target=-", nullptr);
        if (!r) return;
        std::lock_guard lock(mu_);
        bool novel = false;
        for (std::size_t l = 0; l < r->hits.size(); ++l) {
          auto b = hit_bucket(r->hits[l]);
          if (b & ~coverage_[l]) coverage_[l] |= b, novel = true;
        }
        if (novel) corpus_.push_back(std::move(child));
      }
    }
  }

  // -- shared evaluation --------------------------------------------------

  // Runs one input and does the bookkeeping; nullopt once the campaign is over.
  std::optional<ExecutionReport> evaluate(Worker& w, const Input& input, const std::string& label,
                                          const std::vector<std::uint32_t>* tdist) {
    {
      std::lock_guard lock(mu_);
      if (stopped_) return std::nullopt;
    }
    ExecutionReport r = run_input(*w.target, input, ctx_, tdist);
    std::lock_guard lock(mu_);
    if (stopped_) return std::nullopt;
    ++executions_;
    outcome_.best_distance = std::min(outcome_.best_distance, r.progress_distance);
    if (!cfg_.unguided)
      for (std::size_t l = 0; l < r.hits.size(); ++l) coverage_[l] |= hit_bucket(r.hits[l]);

    std::string verdict = "running";
    if (!r.verdict.running()) verdict = confirm(w, input, r);
    if (io_.log) {
      *io_.log << "exec=" << executions_ << " " << label;
      if (tdist) *io_.log << " d=" << distance_to_string(r.distance);
      else *io_.log << " d=-";
      *io_.log << " verdict=" << verdict << "\n";
    }
    const double t = now();
    if (io_.stats && t >= next_stats_) {
      write_stats(false);
      next_stats_ = (std::floor(t / cfg_.stats_interval) + 1) * cfg_.stats_interval;
    }
    if (outcome_.counterexample || t >= cfg_.total_time ||
        (cfg_.max_executions && executions_ >= cfg_.max_executions)) {
      stopped_ = true;
    }
    return r;
  }

  // Replays a violating run and validates liveness lassos. Called under the lock.
  std::string confirm(Worker& w, const Input& input, const ExecutionReport& r) {
    ExecutionReport again = run_input(*w.target, input, ctx_);
    if (!(again.verdict == r.verdict) || !(again.trace == r.trace)) {
      ++outcome_.nondeterministic;
      return "nondeterministic";
    }
    Counterexample cx;
    cx.input = input;
    cx.trace = r.trace;
    cx.verdict = r.verdict;
    cx.automaton_path = r.progress.states;
    cx.snapshots = r.snapshots;
    cx.execution = executions_;
    cx.time = now();
    if (r.verdict.kind == VerdictKind::LivenessViolation) {
      cx.validation = validate_lasso(*w.target, input, r.trace, *r.verdict.lasso, ctx_, cfg_.validation_k);
      if (!cx.validation->confirmed) {
        ++outcome_.spurious;
        return "spurious";
      }
    }
    cx.validated = true;
    outcome_.counterexample = std::move(cx);
    return r.verdict.kind == VerdictKind::SafetyViolation ? "safety" : "liveness";
  }

  void write_stats(bool final) {
    if (!io_.stats) return;
    const double t = now();
    auto& s = *io_.stats;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", t);
    s << "[stats" << (final ? " final" : "") << "]\n";
    s << "time=" << buf << "\n";
    s << "executions=" << executions_ << "\n";
    std::snprintf(buf, sizeof buf, "%.1f", t > 0 ? static_cast<double>(executions_) / t : 0.0);
    s << "execs_per_sec=" << buf << "\n";
    s << "pool_size=" << pool_->size() << "\n";
    s << "corpus_size=" << corpus_.size() << "\n";
    s << "best_l_a=" << distance_to_string(outcome_.best_distance) << "\n";
    s << "windows=" << outcome_.windows << "\n";
    s << "spurious=" << outcome_.spurious << "\n\n";
  }

  TargetFactory make_;
  CampaignConfig cfg_;
  CampaignIo io_;
  std::vector<Input> seeds_;
  ResolvedMap map_;
  BuchiAutomaton automaton_{{}, 0, {false}, {{}}};
  DistanceMap distances_;
  ExecutionContext ctx_;
  std::optional<PrefixPool> pool_;
  std::vector<Input> corpus_;
  std::vector<std::uint8_t> coverage_;
  std::map<LocationId, std::vector<std::uint32_t>> target_distances_;

  std::mutex mu_;
  bool stopped_ = false;
  std::uint64_t executions_ = 0;
  double next_stats_ = 0;
  std::chrono::steady_clock::time_point wall_start_;
  FuzzOutcome outcome_;
};

}  // namespace detail

/// Runs a campaign until the first confirmed counterexample or budget exhaustion.
/// `property_automaton` is the automaton of the negated property.
inline FuzzOutcome fuzz(TargetFactory make, const BuchiAutomaton& property_automaton, const PropositionMap& map,
                        const CampaignConfig& cfg, const CampaignIo& io = {}, std::vector<Input> seeds = {}) {
  detail::Campaign c(std::move(make), property_automaton, map, cfg, io, std::move(seeds));
  return c.run();
}

}  // namespace ltlfuzz
