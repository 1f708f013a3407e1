#include <gtest/gtest.h>

#include <random>

#include "ltlfuzz/monitor.hpp"
#include "oracle.hpp"

using namespace ltlfuzz;

namespace {

constexpr LocationId kLoop = 7;

Event ev(const std::string& p, std::uint32_t cursor, std::optional<std::uint32_t> hash = std::nullopt,
         LocationId loc = 0) {
  return Event{p, hash ? kLoop : loc, cursor, hash};
}

struct Fixture {
  BuchiAutomaton a = oracle::running_example();
  DistanceMap dm = accepting_distance(a);
};

std::string name_of(LocationId l) { return l == kLoop ? "ftpd.c:4067" : "loc" + std::to_string(l); }

std::optional<LocationId> resolve(const std::string& s) {
  if (s == "ftpd.c:4067") return kLoop;
  if (s.rfind("loc", 0) == 0) return static_cast<LocationId>(std::stoul(s.substr(3)));
  return std::nullopt;
}

}  // namespace

TEST(Monitor, LivenessLassoOnRunningExample) {
  Fixture f;
  Monitor m(f.a, f.dm, MonitorMode::Liveness);
  m.observe(ev("a", 1));
  m.observe(ev("o", 2));
  m.observe(ev("l", 3, 0x1A2B));
  EXPECT_TRUE(m.verdict().running());
  m.observe(ev("l", 4, 0x1A2B));
  ASSERT_EQ(m.verdict().kind, VerdictKind::LivenessViolation);
  const auto& w = *m.verdict().lasso;
  EXPECT_EQ(w.loop_start, 2u);
  EXPECT_EQ(w.loop_end, 3u);
  EXPECT_EQ(w.recurring_hash, 0x1A2Bu);
  EXPECT_EQ(w.automaton_state, 2u);
  EXPECT_EQ(w.location, kLoop);
  EXPECT_EQ(m.snapshot_count(), 1u);
  EXPECT_THROW(m.observe(ev("l", 5, 0x1A2B)), MonitorError);
}

TEST(Monitor, SafetyViolationOnFirstBadEvent) {
  auto a = translate_negation(parse_ltl("G !bad"));
  auto dm = accepting_distance(a);
  Monitor m(a, dm, MonitorMode::Safety);
  m.observe(ev("bad", 1));
  EXPECT_EQ(m.verdict().kind, VerdictKind::SafetyViolation);
  EXPECT_EQ(m.verdict().prefix_length, 1u);
}

TEST(Monitor, ResponseBreaksTheLoop) {
  Fixture f;
  Monitor m(f.a, f.dm, MonitorMode::Liveness);
  m.observe(ev("a", 1));
  m.observe(ev("o", 2));
  m.observe(ev("n", 2));
  m.observe(ev("l", 3, 0x10));
  m.observe(ev("l", 4, 0x11));
  EXPECT_TRUE(m.verdict().running());
}

TEST(Monitor, DifferentHashesDoNotCloseALoop) {
  Fixture f;
  Monitor m(f.a, f.dm, MonitorMode::Liveness);
  for (auto e : {ev("a", 1), ev("o", 2), ev("l", 3, 1), ev("l", 4, 2), ev("l", 5, 3)}) m.observe(e);
  EXPECT_TRUE(m.verdict().running());
  EXPECT_EQ(m.snapshot_count(), 3u);
}

TEST(Monitor, SnapshotsOutsideAcceptanceAreIgnored) {
  Fixture f;
  Monitor m(f.a, f.dm, MonitorMode::Liveness);
  m.observe(ev("a", 1));
  m.observe(ev("l", 2, 5));
  m.observe(ev("l", 3, 5));
  EXPECT_TRUE(m.verdict().running());
  EXPECT_EQ(m.snapshot_count(), 0u);
}

TEST(Monitor, SafetyModeIgnoresHashes) {
  Fixture f;
  Monitor m(f.a, f.dm, MonitorMode::Safety);
  m.observe(ev("a", 1));
  EXPECT_TRUE(m.verdict().running());
  m.observe(ev("o", 2));
  EXPECT_EQ(m.verdict().kind, VerdictKind::SafetyViolation);
  EXPECT_EQ(m.verdict().prefix_length, 2u);
}

TEST(Monitor, DeadFrontierResets) {
  auto a = translate(to_nnf(parse_ltl("G a"))).with_universe({"b"});
  auto dm = accepting_distance(a);
  Monitor m(a, dm, MonitorMode::Liveness);
  m.observe(ev("a", 1));
  m.observe(ev("b", 2));
  EXPECT_EQ(m.resets(), 1u);
  EXPECT_EQ(m.frontier(), std::vector<StateId>{a.initial()});
  EXPECT_EQ(m.trace().size(), 2u);
}

TEST(Monitor, UnknownPropositionRejected) {
  Fixture f;
  Monitor m(f.a, f.dm, MonitorMode::Safety);
  EXPECT_THROW(m.observe(ev("zzz", 1)), MonitorError);
}

TEST(Progress, FollowsBestPath) {
  Fixture f;
  Monitor m(f.a, f.dm, MonitorMode::Liveness);
  EXPECT_EQ(m.progress(), (Progress{{0}, 0}));
  m.observe(ev("a", 1));
  m.observe(ev("l", 1, 3));
  m.observe(ev("o", 4));
  EXPECT_EQ(m.progress(), (Progress{{0, 1, 2}, 4}));
  EXPECT_EQ(m.progress_distance(), 0u);
}

TEST(Progress, NoProgressiveTransition) {
  Fixture f;
  Monitor m(f.a, f.dm, MonitorMode::Liveness);
  m.observe(ev("n", 1));
  EXPECT_EQ(m.progress(), (Progress{{0}, 0}));
  EXPECT_EQ(m.progress_distance(), 2u);
}

TEST(Progress, ShortestWitnessKeepsEarliestCursor) {
  Fixture f;
  Monitor m(f.a, f.dm, MonitorMode::Liveness);
  m.observe(ev("a", 1));
  m.observe(ev("a", 2));  // a second a re-enters state 1 along a path of equal length
  EXPECT_EQ(m.progress(), (Progress{{0, 1}, 1}));
}

TEST(Monitor, RandomStreamsKeepInvariants) {
  Fixture f;
  std::mt19937_64 rng(17);
  const char* props[] = {"a", "o", "n", "l"};
  for (int run = 0; run < 500; ++run) {
    Monitor m(f.a, f.dm, MonitorMode::Liveness);
    std::vector<StateId> reference{f.a.initial()};
    for (std::uint32_t i = 0; i < 40 && m.verdict().running(); ++i) {
      std::string p = props[rng() % 4];
      std::optional<std::uint32_t> h;
      if (p == "l") h = static_cast<std::uint32_t>(rng() % 3);
      m.observe(ev(p, i + 1, h));
      // The frontier matches independent stepping, with reset on death.
      reference = step(f.a, reference, p);
      if (reference.empty()) reference = {f.a.initial()};
      EXPECT_EQ(m.frontier(), reference);
      // Progress path is a genuine transition path.
      auto pr = m.progress();
      ASSERT_EQ(pr.states.front(), f.a.initial());
      for (std::size_t k = 1; k < pr.states.size(); ++k) {
        const auto& ts = f.a.transitions(pr.states[k - 1]);
        EXPECT_TRUE(std::any_of(ts.begin(), ts.end(), [&](const Transition& t) { return t.to == pr.states[k]; }));
      }
    }
    if (m.verdict().kind == VerdictKind::LivenessViolation) {
      const auto& w = *m.verdict().lasso;
      const auto& tr = m.trace();
      ASSERT_LT(w.loop_start, w.loop_end);
      EXPECT_EQ(tr[w.loop_start].state_hash, tr[w.loop_end].state_hash);
      EXPECT_EQ(tr[w.loop_start].location, tr[w.loop_end].location);
      EXPECT_TRUE(f.a.is_accepting(w.automaton_state));
      std::vector<StateId> s{w.automaton_state};
      for (std::size_t k = w.loop_start + 1; k <= w.loop_end; ++k) s = step(f.a, s, tr[k].proposition);
      EXPECT_TRUE(std::binary_search(s.begin(), s.end(), w.automaton_state));
    }
  }
}

TEST(Monitor, SafetyVerdictsAreGoodPrefixes) {
  auto a = translate_negation(parse_ltl("G(hello -> X(ccs -> X(ccs_ok | alert)))")).with_universe({"fin"});
  auto dm = accepting_distance(a);
  std::mt19937_64 rng(23);
  const char* props[] = {"hello", "ccs", "ccs_ok", "alert", "fin"};
  std::size_t violations = 0;
  for (int run = 0; run < 2000; ++run) {
    Monitor m(a, dm, MonitorMode::Safety);
    for (std::uint32_t i = 0; i < 12 && m.verdict().running(); ++i) m.observe(ev(props[rng() % 5], i + 1));
    if (m.verdict().running()) continue;
    ++violations;
    std::vector<std::string> prefix;
    for (const auto& e : m.trace()) prefix.push_back(e.proposition);
    for (const char* tail : props) EXPECT_TRUE(accepts_lasso(a, {prefix, {tail}}));
  }
  EXPECT_GT(violations, 0u);
}

TEST(TraceFormat, DumpAndParse) {
  Fixture f;
  Monitor m(f.a, f.dm, MonitorMode::Liveness);
  for (auto e : {ev("a", 1, std::nullopt, 3), ev("o", 2, std::nullopt, 4), ev("l", 3, 0x1A2B), ev("l", 4, 0x1A2B)})
    m.observe(e);
  std::string text = dump_trace(m.trace(), m.verdict(), name_of);
  EXPECT_EQ(text,
            "0 a @loc3 cursor=1\n"
            "1 o @loc4 cursor=2\n"
            "2 l @ftpd.c:4067 cursor=3 hash=0x00001a2b\n"
            "3 l @ftpd.c:4067 cursor=4 hash=0x00001a2b\n"
            "verdict: liveness loop=2..3 hash=0x00001a2b state=2\n");
  EXPECT_EQ(parse_trace(text, resolve), m.trace());
}

TEST(TraceFormat, MalformedLinesReportLineNumber) {
  try {
    parse_trace("0 a @loc1 cursor=1\n\n1 o loc2 cursor=2\n", resolve);
    FAIL();
  } catch (const TraceFormatError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_trace("0 a @loc1 cursor=x\n", resolve), TraceFormatError);
  EXPECT_THROW(parse_trace("1 a @loc1 cursor=1\n", resolve), TraceFormatError);
  EXPECT_THROW(parse_trace("0 a @nowhere cursor=1\n", resolve), TraceFormatError);
  EXPECT_THROW(parse_trace("0 a @loc1 cursor=1 hash=12\n", resolve), TraceFormatError);
}

TEST(TraceFormat, VerdictStrings) {
  EXPECT_EQ(verdict_to_string(Verdict{}), "running");
  EXPECT_EQ(verdict_to_string(Verdict{VerdictKind::SafetyViolation, 4, std::nullopt}), "safety prefix=4");
  EXPECT_EQ(format_hash(0xdeadbeef), "0xdeadbeef");
}
