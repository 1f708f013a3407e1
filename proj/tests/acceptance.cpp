// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>
#include <type_traits>

#include "ltlfuzz/engine.hpp"
#include "ltlfuzz/subjects.hpp"
#include "oracle.hpp"

using namespace ltlfuzz;

namespace {

int failures = 0;
std::size_t spurious_total = 0;
// Snapshot measurements from the quota-ftp campaigns, reported under their own criterion.
std::size_t quota_lassos = 0, max_snapshots = 0;
bool snapshots_ok = true;

void report(int id, bool ok, const std::string& what) {
  std::printf("%s %d %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  failures += !ok;
}

template <typename T>
double median(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? static_cast<double>(v[n / 2]) : (static_cast<double>(v[n / 2 - 1]) + static_cast<double>(v[n / 2])) / 2;
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

struct Subject {
  const SubjectInfo* info;
  PropositionMap map;
  BuchiAutomaton negation;
  BuchiAutomaton extended;

  explicit Subject(const std::string& name)
      : info(SubjectRegistry::instance().find(name)),
        map(PropositionMap::parse(info->map_json)),
        negation(translate_negation(parse_ltl(info->property))),
        extended(negation.with_universe(map.propositions())) {}

  FuzzOutcome run(std::uint64_t seed, bool unguided = false, std::ostream* log = nullptr,
                  std::uint64_t max_execs = 0, double total_time = 300) const {
    CampaignConfig cfg;
    cfg.rng_seed = seed;
    cfg.total_time = total_time;
    cfg.liveness = info->liveness;
    cfg.unguided = unguided;
    cfg.max_executions = max_execs;
    auto out = fuzz(info->make, negation, map, cfg, CampaignIo{log, nullptr, info->name});
    spurious_total += out.spurious;
    return out;
  }
};

void translator_oracle() {
  std::mt19937_64 rng(20240601);
  const std::vector<std::string> ab{"a", "b", "c"};
  auto words = oracle::all_lassos(ab, 3, 3);
  std::set<std::string> seen;
  std::size_t mismatches = 0, oracle_mismatches = 0, tries = 0;
  const auto start = std::chrono::steady_clock::now();
  while (seen.size() < 200 && ++tries < 100000) {
    auto f = oracle::random_nnf(rng, 1 + static_cast<int>(tries % 7), ab);
    if (!seen.insert(to_string(*f)).second) continue;
    auto a = translate(f);
    for (const auto& w : words) {
      const bool expected = eval_on_lasso(*f, w);
      mismatches += accepts_lasso(a, w) != expected;
      oracle_mismatches += oracle::holds(*f, w) != expected;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report(1, seen.size() >= 200 && mismatches == 0 && oracle_mismatches == 0,
         "translator oracle equivalence: " + std::to_string(seen.size()) + " formulas x " +
             std::to_string(words.size()) + " lassos, " + std::to_string(mismatches) + " mismatches (" +
             std::to_string(oracle_mismatches) + " evaluator/oracle disagreements), " + fmt("%.1f s", secs));
}

void running_example() {
  auto a = translate(to_nnf(parse_ltl("F(a & F(o & G !n))")));
  auto words = oracle::all_lassos({"a", "o", "n", "l"}, 3, 3);
  const std::size_t diff = oracle::disagreements(a, oracle::running_example(), words);
  bool not_n_loop = false;
  auto acc = a.accepting_states();
  for (StateId s : acc)
    for (const auto& t : a.transitions(s))
      not_n_loop = not_n_loop || (t.to == s && a.guard_to_string(t.guard) == "!n");
  report(2, diff == 0 && acc.size() == 1 && not_n_loop,
         "running-example automaton: " + std::to_string(a.num_states()) + " states, " + std::to_string(diff) +
             " disagreements over " + std::to_string(words.size()) + " lassos, accepting !n self-loop " +
             (not_n_loop ? "present" : "missing"));
}

void quota_liveness() {
  Subject s("quota-ftp");
  std::vector<double> wall;
  std::vector<double> virt;
  std::size_t found = 0, validated = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto out = s.run(seed);
    wall.push_back(out.wall_seconds);
    virt.push_back(out.elapsed);
    if (!out.counterexample || out.counterexample->verdict.kind != VerdictKind::LivenessViolation) continue;
    ++found;
    const auto& cx = *out.counterexample;
    if (cx.validated && cx.validation && cx.validation->confirmed) ++validated;
    max_snapshots = std::max(max_snapshots, cx.snapshots);
    snapshots_ok = snapshots_ok && cx.snapshots <= 64;
  }
  report(3, found == 10 && validated == 10 && median(wall) <= 60,
         "quota-ftp liveness: " + std::to_string(found) + "/10 lassos, " + std::to_string(validated) +
             "/10 validated (k=3), median wall " + fmt("%.3f s", median(wall)) + ", median campaign clock " +
             fmt("%.1f s", median(virt)));
  quota_lassos = found;
}

void snapshot_memory() {
  // The snapshot key is the 32-bit hash of the addressable state.
  constexpr bool hash32 = std::is_same_v<decltype(Event::state_hash), std::optional<std::uint32_t>>;
  report(7, quota_lassos == 10 && snapshots_ok && hash32,
         "snapshot memory: at most " + std::to_string(max_snapshots) + " recorded snapshot keys (limit 64), " +
             (hash32 ? "one 32-bit hash each" : "hash is not 32-bit"));
}

void safety_subjects() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"auth-copy", "handshake"}) {
    Subject s(name);
    std::size_t found = 0, accepting = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      auto out = s.run(seed);
      if (!out.counterexample || out.counterexample->verdict.kind != VerdictKind::SafetyViolation) continue;
      ++found;
      std::vector<StateId> f{s.extended.initial()};
      for (const auto& e : out.counterexample->trace) f = step(s.extended, f, e.proposition);
      accepting += std::any_of(f.begin(), f.end(), [&](StateId q) { return s.extended.is_accepting(q); });
    }
    ok = ok && found == 10 && accepting == 10;
    detail += std::string(detail.empty() ? "" : "; ") + name + " " + std::to_string(found) + "/10 found, " +
              std::to_string(accepting) + "/10 replays accepting";
  }
  report(4, ok, "safety subjects: " + detail);
}

void ablation() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"auth-copy", "handshake"}) {
    Subject s(name);
    std::vector<std::uint64_t> guided, unguided;
    std::size_t censored = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      auto g = s.run(seed);
      auto u = s.run(seed, true);
      // A run that never finds the bug counts with its full execution budget.
      guided.push_back(g.counterexample ? g.counterexample->execution : g.executions);
      unguided.push_back(u.counterexample ? u.counterexample->execution : u.executions);
      censored += !g.counterexample + !u.counterexample;
    }
    const double ratio = median(guided) / median(unguided);
    ok = ok && ratio <= 0.5;
    detail += std::string(detail.empty() ? "" : "; ") + name + " guided " + fmt("%.1f", median(guided)) +
              " vs unguided " + fmt("%.1f", median(unguided)) + " execs, ratio " + fmt("%.3f", ratio) +
              (censored ? " (" + std::to_string(censored) + " runs hit the budget)" : "");
  }
  report(5, ok, "guidance ablation (median executions to violation): " + detail);
}

void clean_subject() {
  Subject s("clean-subject");
  // The campaign clock charges 1 ms per execution, so 1100 s covers 10^6 executions.
  auto out = s.run(1, false, nullptr, 1'000'000, 1100);
  const bool clean = !out.counterexample && out.executions >= 1'000'000;
  report(6, clean && spurious_total == 0,
         "false positives: clean-subject " + std::to_string(out.executions) + " executions, " +
             (out.counterexample ? "1" : "0") + " counterexamples, " + fmt("%.1f s wall", out.wall_seconds) +
             "; spurious lassos across all campaigns: " + std::to_string(spurious_total));
}

void determinism() {
  Subject s("quota-ftp");
  std::ostringstream a, b;
  s.run(1, false, &a);
  s.run(1, false, &b);
  report(8, !a.str().empty() && a.str() == b.str(),
         "determinism: two seed-1 quota-ftp campaign logs " + std::string(a.str() == b.str() ? "identical" : "differ") +
             " (" + std::to_string(a.str().size()) + " bytes)");
}

void fitness_and_distance() {
  auto a = translate(to_nnf(parse_ltl("F(a & F(o & G !n))")));
  auto dm = accepting_distance(a);
  // Identify states by role, since numbering is the translator's choice.
  StateId acc = a.accepting_states().at(0), mid = a.initial();
  for (const auto& t : a.transitions(a.initial()))
    if (t.to != a.initial()) mid = t.to;
  const bool dist_ok = dm[acc] == 0 && dm[mid] == 1 && dm[a.initial()] == 2;

  PrefixPool pool(a, dm);
  pool.insert(Input{{"QUOTA -n 8", "DATA x"}}, {a.initial(), mid, acc}, Input{});
  const Fraction f0 = fitness_exact(pool[0].states.size(), dm[pool[0].last()], pool[0].prefix.size());
  const Fraction f1 = fitness_exact(pool[1].states.size(), dm[pool[1].last()], pool[1].prefix.size());
  const bool fit_ok = f0 == Fraction{4, 3} && f1 == Fraction{3, 2} && fitness(pool[1], dm) == 1.5;
  report(9, dist_ok && fit_ok,
         "worked examples: fitness " + std::to_string(f0.num) + "/" + std::to_string(f0.den) + " and " +
             std::to_string(f1.num) + "/" + std::to_string(f1.den) + ", l_a {" + distance_to_string(dm[acc]) + ", " +
             distance_to_string(dm[mid]) + ", " + distance_to_string(dm[a.initial()]) + "}");
}

}  // namespace

int main() {
  translator_oracle();
  running_example();
  quota_liveness();
  safety_subjects();
  ablation();
  clean_subject();
  snapshot_memory();
  determinism();
  fitness_and_distance();
  std::printf("%d criteria failed\n", failures);
  return failures ? 1 : 0;
}
