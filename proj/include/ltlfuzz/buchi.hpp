#pragma once

// Büchi automata over single-event words: tableau translation from NNF
// formulas, acceptance distances, frontier stepping and lasso membership.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ltlfuzz/ltl.hpp"

namespace ltlfuzz {

using StateId = std::uint32_t;
using PropId = std::uint32_t;

inline constexpr std::size_t kMaxPropositions = 64;
inline constexpr std::uint32_t kInfinite = std::numeric_limits<std::uint32_t>::max();

/// Conjunction of literals. Under single-event semantics an event e satisfies
/// the guard iff positive ⊆ {e} and e ∉ negative.
struct Guard {
  std::uint64_t positive = 0;
  std::uint64_t negative = 0;

  bool satisfiable() const { return std::popcount(positive) <= 1 && (positive & negative) == 0; }
  /// `event_bit` is zero for events outside the automaton's universe.
  bool satisfied_by(std::uint64_t event_bit) const {
    return (positive & ~event_bit) == 0 && (negative & event_bit) == 0;
  }
  /// Every event satisfying *this also satisfies `other`.
  bool implies(const Guard& other) const {
    if (!satisfiable()) return true;
    if (positive != 0) return other.satisfied_by(positive);
    return other.positive == 0 && (other.negative & ~negative) == 0;
  }
  /// With one positive literal the negative ones are redundant.
  Guard normalized() const {
    if (positive != 0 && satisfiable()) return Guard{positive, 0};
    return *this;
  }

  friend auto operator<=>(const Guard&, const Guard&) = default;
};

struct Transition {
  Guard guard;
  StateId to = 0;

  friend auto operator<=>(const Transition&, const Transition&) = default;
};

class BuchiError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BuchiAutomaton {
 public:
  BuchiAutomaton() = default;

  BuchiAutomaton(std::vector<std::string> aps, StateId initial, std::vector<bool> accepting,
                 std::vector<std::vector<Transition>> transitions)
      : aps_(std::move(aps)),
        initial_(initial),
        accepting_(std::move(accepting)),
        out_(std::move(transitions)) {
    if (aps_.size() > kMaxPropositions) throw BuchiError("too many atomic propositions (max 64)");
    if (accepting_.size() != out_.size()) throw BuchiError("accepting flags and transition lists differ in size");
    if (out_.empty() || initial_ >= out_.size()) throw BuchiError("initial state out of range");
    for (const auto& ts : out_)
      for (const auto& t : ts)
        if (t.to >= out_.size()) throw BuchiError("transition destination out of range");
  }

  std::size_t num_states() const { return out_.size(); }
  StateId initial() const { return initial_; }
  bool is_accepting(StateId s) const { return accepting_[s]; }
  /// A state with no outgoing transitions; runs reaching it die.
  bool is_dead(StateId s) const { return out_[s].empty(); }
  const std::vector<Transition>& transitions(StateId s) const { return out_[s]; }
  const std::vector<std::string>& ap_universe() const { return aps_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

  std::vector<StateId> accepting_states() const {
    std::vector<StateId> out;
    for (StateId s = 0; s < num_states(); ++s)
      if (accepting_[s]) out.push_back(s);
    return out;
  }

  std::optional<PropId> prop_id(std::string_view name) const {
    for (PropId i = 0; i < aps_.size(); ++i)
      if (aps_[i] == name) return i;
    return std::nullopt;
  }
  /// Bit of `name` in guard masks; zero for names outside the universe.
  std::uint64_t event_bit(std::string_view name) const {
    auto id = prop_id(name);
    return id ? (std::uint64_t{1} << *id) : 0;
  }

  /// Copy whose universe also contains `extra` (e.g. loop-header propositions).
  BuchiAutomaton with_universe(const std::vector<std::string>& extra) const {
    BuchiAutomaton copy = *this;
    for (const auto& p : extra)
      if (!copy.prop_id(p)) copy.aps_.push_back(p);
    if (copy.aps_.size() > kMaxPropositions) throw BuchiError("too many atomic propositions (max 64)");
    return copy;
  }

  Guard make_guard(const std::vector<std::string>& pos, const std::vector<std::string>& neg) const {
    Guard g;
    for (const auto& p : pos) g.positive |= require_bit(p);
    for (const auto& n : neg) g.negative |= require_bit(n);
    return g;
  }

  std::string guard_to_string(const Guard& g) const {
    std::string out;
    for (PropId i = 0; i < aps_.size(); ++i) {
      if (g.positive >> i & 1) out += (out.empty() ? "" : " & ") + aps_[i];
    }
    for (PropId i = 0; i < aps_.size(); ++i) {
      if (g.negative >> i & 1) out += (out.empty() ? "!" : " & !") + aps_[i];
    }
    return out.empty() ? "true" : out;
  }

 private:
  std::uint64_t require_bit(const std::string& name) const {
    auto id = prop_id(name);
    if (!id) throw BuchiError("proposition '" + name + "' not in automaton universe");
    return std::uint64_t{1} << *id;
  }

  std::vector<std::string> aps_;
  StateId initial_ = 0;
  std::vector<bool> accepting_;
  std::vector<std::vector<Transition>> out_;
  std::vector<std::string> warnings_;
};

// ---------------------------------------------------------------------------
// Graph helpers

namespace detail {

inline std::vector<bool> reachable_from(const BuchiAutomaton& a, StateId from) {
  std::vector<bool> seen(a.num_states());
  std::vector<StateId> stack{from};
  seen[from] = true;
  while (!stack.empty()) {
    StateId s = stack.back();
    stack.pop_back();
    for (const auto& t : a.transitions(s))
      if (!seen[t.to]) seen[t.to] = true, stack.push_back(t.to);
  }
  return seen;
}

}  // namespace detail

/// Accepting states that can return to themselves through at least one transition.
inline std::vector<bool> loop_capable_accepting(const BuchiAutomaton& a) {
  std::vector<bool> out(a.num_states());
  for (StateId s = 0; s < a.num_states(); ++s) {
    if (!a.is_accepting(s)) continue;
    for (const auto& t : a.transitions(s)) {
      if (detail::reachable_from(a, t.to)[s]) {
        out[s] = true;
        break;
      }
    }
  }
  return out;
}

/// Shortest number of transitions from each state to a loop-capable accepting state.
struct DistanceMap {
  std::vector<std::uint32_t> dist;

  std::uint32_t operator[](StateId s) const { return dist[s]; }
  bool finite(StateId s) const { return dist[s] != kInfinite; }
  std::size_t size() const { return dist.size(); }
};

inline DistanceMap accepting_distance(const BuchiAutomaton& a) {
  const std::size_t n = a.num_states();
  std::vector<std::vector<StateId>> rev(n);
  for (StateId s = 0; s < n; ++s)
    for (const auto& t : a.transitions(s)) rev[t.to].push_back(s);

  DistanceMap dm{std::vector<std::uint32_t>(n, kInfinite)};
  std::deque<StateId> queue;
  auto anchors = loop_capable_accepting(a);
  for (StateId s = 0; s < n; ++s)
    if (anchors[s]) dm.dist[s] = 0, queue.push_back(s);
  while (!queue.empty()) {
    StateId s = queue.front();
    queue.pop_front();
    for (StateId p : rev[s]) {
      if (dm.dist[p] == kInfinite) {
        dm.dist[p] = dm.dist[s] + 1;
        queue.push_back(p);
      }
    }
  }
  return dm;
}

/// True when no run can visit an accepting state infinitely often.
inline bool empty_language(const BuchiAutomaton& a) {
  return !accepting_distance(a).finite(a.initial());
}

// ---------------------------------------------------------------------------
// Stepping and lasso membership

/// States reachable from `frontier` (sorted, unique) by one transition enabled by `event_bit`.
inline std::vector<StateId> step(const BuchiAutomaton& a, const std::vector<StateId>& frontier,
                                 std::uint64_t event_bit) {
  std::vector<StateId> next;
  for (StateId s : frontier)
    for (const auto& t : a.transitions(s))
      if (t.guard.satisfied_by(event_bit)) next.push_back(t.to);
  std::sort(next.begin(), next.end());
  next.erase(std::unique(next.begin(), next.end()), next.end());
  return next;
}

inline std::vector<StateId> step(const BuchiAutomaton& a, const std::vector<StateId>& frontier,
                                 std::string_view event) {
  return step(a, frontier, a.event_bit(event));
}

/// Decides membership of prefix . loop^omega by searching the (state, position)
/// product for a reachable cycle through an accepting state.
inline bool accepts_lasso(const BuchiAutomaton& a, const LassoWord& w) {
  if (w.loop.empty()) throw std::invalid_argument("lasso loop must be non-empty");
  const std::size_t positions = w.length();
  std::vector<std::uint64_t> bits(positions);
  for (std::size_t i = 0; i < positions; ++i) bits[i] = a.event_bit(w.at(i));

  const std::size_t n = a.num_states() * positions;
  auto node = [positions](StateId s, std::size_t p) { return s * positions + p; };

  // Tarjan over the reachable product; a component counts if it has an edge and an accepting state.
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<bool> on_stack(n);
  std::vector<std::size_t> stack;
  int counter = 0;
  bool found = false;

  std::function<void(std::size_t)> visit = [&](std::size_t v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    const StateId s = static_cast<StateId>(v / positions);
    const std::size_t p = v % positions;
    bool self_edge = false;
    for (const auto& t : a.transitions(s)) {
      if (!t.guard.satisfied_by(bits[p])) continue;
      std::size_t u = node(t.to, w.succ(p));
      if (u == v) self_edge = true;
      if (index[u] < 0) {
        visit(u);
        if (found) return;
        low[v] = std::min(low[v], low[u]);
      } else if (on_stack[u]) {
        low[v] = std::min(low[v], index[u]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<std::size_t> comp;
      std::size_t u;
      do {
        u = stack.back();
        stack.pop_back();
        on_stack[u] = false;
        comp.push_back(u);
      } while (u != v);
      if (comp.size() > 1 || self_edge) {
        for (std::size_t c : comp)
          if (a.is_accepting(static_cast<StateId>(c / positions))) found = true;
      }
    }
  };
  visit(node(a.initial(), 0));
  return found;
}

// ---------------------------------------------------------------------------
// Tableau translation

namespace detail {

class Tableau {
 public:
  explicit Tableau(const FormulaPtr& root) { root_ = intern(root); }

  BuchiAutomaton build() {
    expand();
    return degeneralize();
  }

 private:
  static constexpr int kInit = -1;

  struct Node {
    std::set<int> incoming;
    std::set<int> fresh;
    std::set<int> old;
    std::set<int> next;
  };

  int intern(const FormulaPtr& f) {
    std::string key = to_string(*f);
    if (auto it = ids_.find(key); it != ids_.end()) return it->second;
    int lhs = f->lhs() ? intern(f->lhs()) : -1;
    int rhs = f->rhs() ? intern(f->rhs()) : -1;
    int id = static_cast<int>(subs_.size());
    subs_.push_back({f, lhs, rhs});
    ids_.emplace(std::move(key), id);
    if (f->op() == Op::AP) aps_.insert(f->name());
    return id;
  }

  std::optional<int> lookup(const std::string& key) const {
    auto it = ids_.find(key);
    return it == ids_.end() ? std::nullopt : std::optional<int>(it->second);
  }

  bool contradicts(int lit, const std::set<int>& old) const {
    const Formula& f = *subs_[lit].f;
    std::optional<int> neg;
    if (f.op() == Op::AP) neg = lookup("!" + f.name());
    else if (f.op() == Op::Not) neg = lookup(f.child()->name());
    return neg && old.count(*neg);
  }

  void expand() {
    std::vector<Node> work;
    work.push_back(Node{{kInit}, {root_}, {}, {}});
    while (!work.empty()) {
      Node node = std::move(work.back());
      work.pop_back();
      if (node.fresh.empty()) {
        auto same = std::find_if(nodes_.begin(), nodes_.end(),
                                 [&](const Node& nd) { return nd.old == node.old && nd.next == node.next; });
        if (same != nodes_.end()) {
          same->incoming.insert(node.incoming.begin(), node.incoming.end());
          continue;
        }
        int id = static_cast<int>(nodes_.size());
        std::set<int> succ_new = node.next;
        nodes_.push_back(std::move(node));
        work.push_back(Node{{id}, std::move(succ_new), {}, {}});
        continue;
      }
      int eta = *node.fresh.begin();
      node.fresh.erase(node.fresh.begin());
      if (node.old.count(eta)) {
        work.push_back(std::move(node));
        continue;
      }
      const Sub& sub = subs_[eta];
      auto add_new = [](Node& n, int f) {
        if (!n.old.count(f)) n.fresh.insert(f);
      };
      switch (sub.f->op()) {
        case Op::False: break;
        case Op::True:
        case Op::AP:
        case Op::Not:
          if (contradicts(eta, node.old)) break;
          node.old.insert(eta);
          work.push_back(std::move(node));
          break;
        case Op::And:
          add_new(node, sub.lhs);
          add_new(node, sub.rhs);
          node.old.insert(eta);
          work.push_back(std::move(node));
          break;
        case Op::Next:
          node.old.insert(eta);
          node.next.insert(sub.lhs);
          work.push_back(std::move(node));
          break;
        case Op::Or:
        case Op::Until:
        case Op::Release: {
          Node first = node, second = std::move(node);
          first.old.insert(eta);
          second.old.insert(eta);
          if (sub.f->op() == Op::Or) {
            add_new(first, sub.lhs);
            add_new(second, sub.rhs);
          } else if (sub.f->op() == Op::Until) {
            add_new(first, sub.lhs);
            first.next.insert(eta);
            add_new(second, sub.rhs);
          } else {
            add_new(first, sub.rhs);
            first.next.insert(eta);
            add_new(second, sub.lhs);
            add_new(second, sub.rhs);
          }
          work.push_back(std::move(second));
          work.push_back(std::move(first));
          break;
        }
        default: throw BuchiError("formula is not in negation normal form");
      }
    }
  }

  BuchiAutomaton degeneralize() {
    std::vector<std::string> aps(aps_.begin(), aps_.end());
    auto bit = [&aps](const std::string& name) {
      auto it = std::find(aps.begin(), aps.end(), name);
      return std::uint64_t{1} << (it - aps.begin());
    };

    std::vector<Guard> label(nodes_.size());
    for (std::size_t q = 0; q < nodes_.size(); ++q) {
      for (int f : nodes_[q].old) {
        const Formula& lit = *subs_[f].f;
        if (lit.op() == Op::AP) label[q].positive |= bit(lit.name());
        else if (lit.op() == Op::Not) label[q].negative |= bit(lit.child()->name());
      }
    }

    // One acceptance set per Until subformula.
    std::vector<std::vector<bool>> sets;
    for (std::size_t i = 0; i < subs_.size(); ++i) {
      if (subs_[i].f->op() != Op::Until) continue;
      std::vector<bool> member(nodes_.size());
      for (std::size_t q = 0; q < nodes_.size(); ++q)
        member[q] = !nodes_[q].old.count(static_cast<int>(i)) || nodes_[q].old.count(subs_[i].rhs);
      sets.push_back(std::move(member));
    }
    const std::size_t m = sets.size();

    std::vector<std::vector<int>> succ(nodes_.size() + 1);  // index 0 is the init pseudo-node
    for (std::size_t q = 0; q < nodes_.size(); ++q)
      for (int from : nodes_[q].incoming) succ[from + 1].push_back(static_cast<int>(q));

    // Counter c in [0, m]: entering q' advances c through every consecutive set
    // q' belongs to; c == m marks an accepting state and restarts at 0 on exit.
    std::map<std::pair<int, std::size_t>, StateId> ids;
    std::vector<std::pair<int, std::size_t>> states;
    std::vector<std::vector<Transition>> out;
    std::vector<bool> accepting;
    auto get = [&](int q, std::size_t c) {
      auto [it, inserted] = ids.try_emplace({q, c}, static_cast<StateId>(states.size()));
      if (inserted) {
        states.push_back({q, c});
        out.emplace_back();
        accepting.push_back(q != kInit && c == m);
      }
      return it->second;
    };
    get(kInit, 0);
    std::vector<std::string> warnings;
    for (std::size_t i = 0; i < states.size(); ++i) {
      auto [q, c] = states[i];
      const std::size_t base = (q != kInit && c == m) ? 0 : c;
      for (int dest : succ[q + 1]) {
        Guard g = label[dest];
        if (!g.satisfiable()) {
          warnings.push_back("pruned guard with simultaneous propositions: unsatisfiable under single-event semantics");
          continue;
        }
        std::size_t nc = base;
        while (nc < m && sets[nc][dest]) ++nc;
        StateId d = get(dest, nc);
        out[i].push_back({g.normalized(), d});
      }
    }
    BuchiAutomaton a(std::move(aps), 0, std::move(accepting), std::move(out));
    std::sort(warnings.begin(), warnings.end());
    warnings.erase(std::unique(warnings.begin(), warnings.end()), warnings.end());
    for (auto& w : warnings) a.add_warning(std::move(w));
    return a;
  }

  struct Sub {
    FormulaPtr f;
    int lhs;
    int rhs;
  };

  std::vector<Sub> subs_;
  std::map<std::string, int> ids_;
  std::set<std::string> aps_;
  int root_ = 0;
  std::vector<Node> nodes_;
};

// Keeps `keep` states, renumbering them breadth-first from the initial state.
inline BuchiAutomaton restrict_and_renumber(const BuchiAutomaton& a, const std::vector<bool>& keep) {
  std::vector<StateId> order{a.initial()};
  std::vector<StateId> newid(a.num_states(), kInfinite);
  newid[a.initial()] = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (const auto& t : a.transitions(order[i])) {
      if (keep[t.to] && newid[t.to] == kInfinite) {
        newid[t.to] = static_cast<StateId>(order.size());
        order.push_back(t.to);
      }
    }
  }
  std::vector<std::vector<Transition>> out(order.size());
  std::vector<bool> acc(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    acc[i] = a.is_accepting(order[i]);
    for (const auto& t : a.transitions(order[i]))
      if (newid[t.to] != kInfinite) out[i].push_back({t.guard, newid[t.to]});
  }
  BuchiAutomaton r(a.ap_universe(), 0, std::move(acc), std::move(out));
  for (const auto& w : a.warnings()) r.add_warning(w);
  return r;
}

// Drops transitions subsumed by another transition to the same destination.
inline std::vector<Transition> simplify_edges(std::vector<Transition> ts) {
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  std::vector<Transition> out;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    bool subsumed = false;
    for (std::size_t j = 0; j < ts.size() && !subsumed; ++j) {
      if (i == j || ts[i].to != ts[j].to || !ts[i].guard.implies(ts[j].guard)) continue;
      // Equivalent guards: keep the lower index only.
      subsumed = !ts[j].guard.implies(ts[i].guard) || j < i;
    }
    if (!subsumed) out.push_back(ts[i]);
  }
  return out;
}

// Merges states with identical acceptance and outgoing transitions until stable.
inline BuchiAutomaton merge_duplicates(const BuchiAutomaton& a) {
  const std::size_t n = a.num_states();
  std::vector<StateId> rep(n);
  for (StateId s = 0; s < n; ++s) rep[s] = s;
  for (bool changed = true; changed;) {
    changed = false;
    std::map<std::pair<bool, std::vector<Transition>>, StateId> seen;
    for (StateId s = 0; s < n; ++s) {
      if (rep[s] != s) continue;
      std::vector<Transition> ts;
      for (const auto& t : a.transitions(s)) ts.push_back({t.guard, rep[t.to]});
      auto key = std::make_pair(a.is_accepting(s), simplify_edges(std::move(ts)));
      auto [it, inserted] = seen.try_emplace(std::move(key), s);
      if (!inserted) {
        for (auto& r : rep)
          if (r == s) r = it->second;
        changed = true;
      }
    }
  }
  std::vector<std::vector<Transition>> out(n);
  std::vector<bool> acc(n);
  for (StateId s = 0; s < n; ++s) {
    acc[s] = a.is_accepting(s);
    if (rep[s] != s) continue;
    std::vector<Transition> ts;
    for (const auto& t : a.transitions(s)) ts.push_back({t.guard, rep[t.to]});
    out[s] = simplify_edges(std::move(ts));
  }
  BuchiAutomaton merged(a.ap_universe(), rep[a.initial()], std::move(acc), std::move(out));
  for (const auto& w : a.warnings()) merged.add_warning(w);
  std::vector<bool> keep(n);
  for (StateId s = 0; s < n; ++s) keep[s] = rep[s] == s;
  return restrict_and_renumber(merged, keep);
}

}  // namespace detail

/// Removes states that are unreachable or cannot reach an accepting cycle, drops
/// acceptance from states on no cycle, then merges duplicate states. Language is preserved.
inline BuchiAutomaton prune(const BuchiAutomaton& a) {
  const std::size_t n = a.num_states();
  auto dm = accepting_distance(a);
  auto reach = detail::reachable_from(a, a.initial());
  std::vector<bool> keep(n);
  for (StateId s = 0; s < n; ++s) keep[s] = reach[s] && dm.finite(s);
  keep[a.initial()] = true;
  BuchiAutomaton kept = detail::merge_duplicates(detail::restrict_and_renumber(a, keep));
  // A run passes a state that lies on no cycle at most once, so its mark is irrelevant.
  std::vector<std::vector<Transition>> out;
  for (StateId s = 0; s < kept.num_states(); ++s) out.push_back(kept.transitions(s));
  BuchiAutomaton cleared(kept.ap_universe(), kept.initial(), loop_capable_accepting(kept), std::move(out));
  for (const auto& w : kept.warnings()) cleared.add_warning(w);
  return detail::merge_duplicates(cleared);
}

/// Builds an automaton accepting exactly the words satisfying `f` (which must be in NNF).
inline BuchiAutomaton translate(const FormulaPtr& f) {
  if (!is_nnf(*f)) throw BuchiError("formula is not in negation normal form: " + to_string(*f));
  BuchiAutomaton raw = detail::Tableau(f).build();
  return prune(raw);
}

/// Automaton of ¬φ for a property φ, the form the fuzzer consumes.
inline BuchiAutomaton translate_negation(const FormulaPtr& property) {
  return translate(to_nnf(negate(property)));
}

// ---------------------------------------------------------------------------
// Dump formats

inline std::string dump_text(const BuchiAutomaton& a) {
  std::ostringstream os;
  for (StateId s = 0; s < a.num_states(); ++s) {
    os << "state " << s;
    if (s == a.initial()) os << " initial";
    if (a.is_accepting(s)) os << " accepting";
    if (a.is_dead(s)) os << " dead";
    os << '\n';
    for (const auto& t : a.transitions(s)) os << "  --[ " << a.guard_to_string(t.guard) << " ]--> " << t.to << '\n';
  }
  return os.str();
}

inline nlohmann::ordered_json to_json(const BuchiAutomaton& a) {
  nlohmann::ordered_json j;
  j["propositions"] = a.ap_universe();
  j["states"] = a.num_states();
  j["initial"] = a.initial();
  j["accepting"] = a.accepting_states();
  auto ts = nlohmann::ordered_json::array();
  auto names = [&a](std::uint64_t mask) {
    std::vector<std::string> out;
    for (PropId i = 0; i < a.ap_universe().size(); ++i)
      if (mask >> i & 1) out.push_back(a.ap_universe()[i]);
    return out;
  };
  for (StateId s = 0; s < a.num_states(); ++s) {
    for (const auto& t : a.transitions(s)) {
      ts.push_back({{"from", s}, {"to", t.to}, {"positive", names(t.guard.positive)},
                    {"negative", names(t.guard.negative)}});
    }
  }
  j["transitions"] = std::move(ts);
  return j;
}

inline BuchiAutomaton from_json(const nlohmann::json& j) {
  try {
    auto aps = j.at("propositions").get<std::vector<std::string>>();
    auto n = j.at("states").get<std::size_t>();
    std::vector<bool> acc(n);
    for (auto s : j.at("accepting").get<std::vector<StateId>>()) {
      if (s >= n) throw BuchiError("accepting state out of range");
      acc[s] = true;
    }
    BuchiAutomaton shell(aps, 0, std::vector<bool>(1), {{}});
    std::vector<std::vector<Transition>> out(n);
    for (const auto& t : j.at("transitions")) {
      auto from = t.at("from").get<StateId>();
      if (from >= n) throw BuchiError("transition source out of range");
      out[from].push_back({shell.make_guard(t.at("positive").get<std::vector<std::string>>(),
                                            t.at("negative").get<std::vector<std::string>>()),
                           t.at("to").get<StateId>()});
    }
    return BuchiAutomaton(std::move(aps), j.at("initial").get<StateId>(), std::move(acc), std::move(out));
  } catch (const nlohmann::json::exception& e) {
    throw BuchiError(std::string("malformed automaton document: ") + e.what());
  }
}

}  // namespace ltlfuzz
