#include <gtest/gtest.h>

#include <random>

#include "ltlfuzz/subjects.hpp"
#include "oracle.hpp"

using namespace ltlfuzz;

namespace {

struct Quota {
  std::unique_ptr<Target> target = SubjectRegistry::instance().find("quota-ftp")->make();
  BuchiAutomaton automaton = translate_negation(parse_ltl(subjects::kQuotaProperty)).with_universe({"l"});
  DistanceMap distances = accepting_distance(automaton);
  ResolvedMap map = resolve_map(PropositionMap::parse(subjects::kQuotaMap), target->location_graph(),
                                atomic_propositions(*parse_ltl(subjects::kQuotaProperty)));
  ExecutionContext ctx(MonitorMode mode = MonitorMode::Liveness) const {
    return ExecutionContext{&automaton, &distances, &map, mode};
  }
};

Input violating_upload() {
  return Input{{"QUOTA -n 8", "STOR f", "DATA 0123456789abcdef", "DATA x", "DATA x", "DATA x"}};
}

Input random_input(std::mt19937_64& rng, const std::vector<std::string>& dict) {
  Input in;
  const std::size_t n = rng() % 12;
  for (std::size_t i = 0; i < n; ++i) in.messages.push_back(dict[rng() % dict.size()]);
  return in;
}

// A loop that spins a fixed number of times inside one message, always in the same state.
class BoundedSpin : public subjects::SubjectBase {
 public:
  BoundedSpin() {
    entry_ = graph_.add("spin:entry");
    head_ = graph_.add("spin:head", true);
    graph_.edge(entry_, head_);
    graph_.edge(head_, head_);
  }
  void reset() override {}
  std::string addressable_state() const override { return "constant"; }

 protected:
  void handle(std::string_view) override {
    visit(entry_);
    for (int i = 0; i < 2; ++i) {
      if (!tick()) return;
      fire("l", head_);
    }
  }

 private:
  LocationId entry_, head_;
};

}  // namespace

TEST(Input, SerializationRoundTrip) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    Input in;
    for (std::size_t m = rng() % 6; m > 0; --m) {
      std::string s(rng() % 20, '\0');
      for (auto& c : s) c = static_cast<char>(rng());
      in.messages.push_back(s);
    }
    const std::string bytes = serialize_input(in);
    EXPECT_EQ(bytes.size(), in.serialized_size());
    std::size_t used = 0;
    EXPECT_EQ(deserialize_input(bytes, &used), in);
    EXPECT_EQ(used, bytes.size());
    EXPECT_EQ(from_hex(to_hex(bytes)), bytes);
  }
  EXPECT_THROW(deserialize_input("\x02\0\0\0", nullptr), ConfigError);
  EXPECT_THROW(from_hex("abc"), ConfigError);
  EXPECT_THROW(from_hex("zz"), ConfigError);
}

TEST(Input, HashesAreStable) {
  EXPECT_EQ(fnv1a32(""), 2166136261u);
  EXPECT_EQ(fnv1a32("a"), 0xe40c292cu);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
}

TEST(LocationGraph, DistancesOnQuotaSubject) {
  Quota q;
  const auto& g = q.target->location_graph();
  auto entry = *g.find("session:entry");
  auto write = *g.find("safe_rw.c:12");
  EXPECT_EQ(location_distance(g, entry, write), 4u);
  EXPECT_EQ(location_distance(g, write, write), 0u);
  EXPECT_TRUE(g.is_loop_entry(*g.find("ftpd.c:4067")));
  EXPECT_FALSE(g.find("nowhere"));
}

TEST(LocationGraph, DistancesAgreeWithEdgeRelaxation) {
  for (const auto& name : SubjectRegistry::instance().names()) {
    auto t = SubjectRegistry::instance().find(name)->make();
    const auto& g = t->location_graph();
    for (LocationId target = 0; target < g.size(); ++target) {
      auto d = g.distances_to(target);
      EXPECT_EQ(d[target], 0u);
      for (LocationId s = 0; s < g.size(); ++s) {
        std::uint32_t best = s == target ? 0 : kInfinite;
        for (LocationId n : g.successors(s))
          if (d[n] != kInfinite) best = std::min(best, d[n] + 1);
        EXPECT_EQ(d[s], best) << name << " " << g.name(s) << " -> " << g.name(target);
      }
    }
  }
}

TEST(LocationGraph, Errors) {
  LocationGraph g;
  auto a = g.add("a");
  EXPECT_THROW(g.add("a"), ConfigError);
  EXPECT_THROW(g.edge(a, 5), ConfigError);
  EXPECT_EQ(location_distance(g, a, a), 0u);
}

TEST(PropositionMap, ParsesAndRoundTrips) {
  auto m = PropositionMap::parse(subjects::kQuotaMap);
  EXPECT_EQ(m.propositions(), (std::vector<std::string>{"a", "l", "n", "o"}));
  EXPECT_TRUE(m.is_loop_header("l"));
  EXPECT_EQ(m.entries.at("o").size(), 2u);
  auto again = PropositionMap::from_json(nlohmann::json::parse(m.to_json().dump()));
  EXPECT_EQ(again.digest(), m.digest());
}

TEST(PropositionMap, UnmappedPropositionIsNamed) {
  Quota q;
  auto m = PropositionMap::parse(subjects::kQuotaMap);
  m.entries.erase("o");
  try {
    resolve_map(m, q.target->location_graph(), {"a", "o", "n"});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("'o'"), std::string::npos);
  }
}

TEST(PropositionMap, RejectsBadLocations) {
  Quota q;
  auto m = PropositionMap::parse(subjects::kQuotaMap);
  m.entries["a"].push_back({"ftpd.c:9999", "true"});
  EXPECT_THROW(resolve_map(m, q.target->location_graph(), {"a"}), ConfigError);
  auto h = PropositionMap::parse(subjects::kQuotaMap);
  h.loop_headers.push_back("a");
  EXPECT_THROW(resolve_map(h, q.target->location_graph(), {"a"}), ConfigError);
  EXPECT_THROW(PropositionMap::parse("{"), ConfigError);
  EXPECT_THROW(PropositionMap::parse(R"({"propositions": {}, "loop_headers": ["l"]})"), ConfigError);
}

TEST(Execution, EmptyInputMakesNoProgress) {
  Quota q;
  auto r = run_input(*q.target, Input{}, q.ctx());
  EXPECT_TRUE(r.verdict.running());
  EXPECT_EQ(r.progress.states, std::vector<StateId>{0});
  EXPECT_TRUE(r.trace.empty());
  EXPECT_EQ(r.progress_distance, 2u);
}

TEST(Execution, UploadWithoutQuotaFiresNoActivation) {
  Quota q;
  auto r = run_input(*q.target, Input{{"STOR f", "DATA abc", "DATA abc"}}, q.ctx());
  for (const auto& e : r.trace) EXPECT_NE(e.proposition, "a");
  EXPECT_EQ(r.progress.states, std::vector<StateId>{0});
}

TEST(Execution, QuotaViolationIsALasso) {
  Quota q;
  auto in = violating_upload();
  auto r = run_input(*q.target, in, q.ctx());
  ASSERT_EQ(r.verdict.kind, VerdictKind::LivenessViolation);
  EXPECT_EQ(r.progress.states, (std::vector<StateId>{0, 1, 2}));
  EXPECT_EQ(r.prefix, in.prefix(r.progress.cursor));
  const auto& w = *r.verdict.lasso;
  EXPECT_EQ(q.target->location_graph().name(w.location), "ftpd.c:4067");

  auto v = validate_lasso(*q.target, in, r.trace, w, q.ctx());
  EXPECT_TRUE(v.confirmed);
  EXPECT_FALSE(v.used_fallback);
  EXPECT_GE(v.recurrences, 3u);
}

TEST(Execution, PatchedSubjectAnswers552) {
  auto t = SubjectRegistry::instance().find("clean-subject")->make();
  Quota q;
  auto r = run_input(*t, violating_upload(), q.ctx());
  EXPECT_TRUE(r.verdict.running());
  bool saw_n = false;
  for (const auto& e : r.trace) saw_n = saw_n || e.proposition == "n";
  EXPECT_TRUE(saw_n);
}

TEST(Execution, DeterministicReplay) {
  Quota q;
  std::mt19937_64 rng(5);
  auto dict = q.target->dictionary();
  auto fresh = SubjectRegistry::instance().find("quota-ftp")->make();
  for (int i = 0; i < 100; ++i) {
    auto in = random_input(rng, dict);
    auto r1 = run_input(*q.target, in, q.ctx());
    auto r2 = run_input(*fresh, in, q.ctx());
    EXPECT_EQ(r1.trace, r2.trace);
    EXPECT_EQ(r1.hits, r2.hits);
    EXPECT_EQ(r1.progress, r2.progress);
    EXPECT_EQ(r1.verdict.kind, r2.verdict.kind);
  }
}

TEST(Execution, TraceReplaysThroughStep) {
  Quota q;
  std::mt19937_64 rng(6);
  auto dict = q.target->dictionary();
  for (int i = 0; i < 200; ++i) {
    auto in = random_input(rng, dict);
    Monitor m(q.automaton, q.distances, MonitorMode::Safety);
    auto r = run_input(*q.target, in, q.ctx(MonitorMode::Safety));
    std::vector<StateId> frontier{q.automaton.initial()};
    for (const auto& e : r.trace) {
      m.observe(e);
      frontier = step(q.automaton, frontier, e.proposition);
      if (frontier.empty()) frontier = {q.automaton.initial()};
    }
    EXPECT_EQ(m.frontier(), frontier);
    EXPECT_EQ(m.progress(), r.progress);
  }
}

TEST(Execution, EventsOnlyAtMappedLocations) {
  for (const auto& name : SubjectRegistry::instance().names()) {
    const auto* info = SubjectRegistry::instance().find(name);
    auto t = info->make();
    auto prop = parse_ltl(info->property);
    auto pm = PropositionMap::parse(info->map_json);
    auto a = translate_negation(prop).with_universe(pm.propositions());
    auto dm = accepting_distance(a);
    auto map = resolve_map(pm, t->location_graph(), atomic_propositions(*prop));
    ExecutionContext ctx{&a, &dm, &map, MonitorMode::Safety};
    std::mt19937_64 rng(9);
    auto dict = t->dictionary();
    for (int i = 0; i < 100; ++i) {
      // run_input throws on a contract violation.
      auto r = run_input(*t, random_input(rng, dict), ctx);
      for (const auto& e : r.trace) EXPECT_TRUE(r.visited[e.location]);
    }
  }
}

TEST(Execution, StepBudgetStopsExecution) {
  Quota q;
  q.target->set_step_budget(3);
  auto r = run_input(*q.target, Input{{"QUOTA -n 8", "STOR f", "DATA 0123456789abcdef"}}, q.ctx());
  EXPECT_TRUE(r.step_budget_exhausted);
}

TEST(Validation, BoundedLoopIsNotConfirmed) {
  BoundedSpin t;
  auto a = translate_negation(parse_ltl("F !l"));
  auto dm = accepting_distance(a);
  PropositionMap pm = PropositionMap::parse(R"({"propositions": {"l": [{"location": "spin:head"}]},
                                                "loop_headers": ["l"]})");
  auto map = resolve_map(pm, t.location_graph(), {"l"});
  ExecutionContext ctx{&a, &dm, &map, MonitorMode::Liveness};
  Input in{{"go"}};
  auto r = run_input(t, in, ctx);
  ASSERT_EQ(r.verdict.kind, VerdictKind::LivenessViolation);
  auto v = validate_lasso(t, in, r.trace, *r.verdict.lasso, ctx);
  EXPECT_TRUE(v.used_fallback);
  EXPECT_FALSE(v.confirmed);
  EXPECT_EQ(v.recurrences, 1u);
}

TEST(Subjects, RegistryContents) {
  auto names = SubjectRegistry::instance().names();
  EXPECT_EQ(names, (std::vector<std::string>{"auth-copy", "clean-subject", "handshake", "quota-ftp"}));
  for (const auto& n : names) {
    const auto* info = SubjectRegistry::instance().find(n);
    EXPECT_FALSE(info->version.empty());
    EXPECT_NO_THROW(parse_ltl(info->property));
  }
  EXPECT_EQ(SubjectRegistry::instance().find("missing"), nullptr);
}

TEST(Subjects, AuthCopyWithoutLoginViolates) {
  const auto* info = SubjectRegistry::instance().find("auth-copy");
  auto t = info->make();
  auto prop = parse_ltl(info->property);
  auto pm = PropositionMap::parse(info->map_json);
  auto a = translate_negation(prop).with_universe(pm.propositions());
  auto dm = accepting_distance(a);
  auto map = resolve_map(pm, t->location_graph(), atomic_propositions(*prop));
  ExecutionContext ctx{&a, &dm, &map, MonitorMode::Safety};
  auto bad = run_input(*t, Input{{"USER bob", "CPFR /etc/passwd", "CPTO /tmp/x"}}, ctx);
  EXPECT_EQ(bad.verdict.kind, VerdictKind::SafetyViolation);
  auto good = run_input(*t, Input{{"USER alice", "PASS secret", "CPFR /a", "CPTO /b"}}, ctx);
  EXPECT_TRUE(good.verdict.running());
}

TEST(Subjects, HandshakeResumptionViolates) {
  const auto* info = SubjectRegistry::instance().find("handshake");
  auto t = info->make();
  auto prop = parse_ltl(info->property);
  auto pm = PropositionMap::parse(info->map_json);
  auto a = translate_negation(prop).with_universe(pm.propositions());
  auto dm = accepting_distance(a);
  auto map = resolve_map(pm, t->location_graph(), atomic_propositions(*prop));
  ExecutionContext ctx{&a, &dm, &map, MonitorMode::Safety};
  auto bad = run_input(*t, Input{{"CLIENT_HELLO", "KEY_EXCHANGE resume", "CHANGE_CIPHER_SPEC", "FINISHED"}}, ctx);
  EXPECT_EQ(bad.verdict.kind, VerdictKind::SafetyViolation);
  auto good = run_input(*t, Input{{"CLIENT_HELLO", "KEY_EXCHANGE", "CHANGE_CIPHER_SPEC", "FINISHED"}}, ctx);
  EXPECT_TRUE(good.verdict.running());
}
