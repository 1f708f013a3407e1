#pragma once

// Command-line front end: fuzz, translate, check-trace and validate.
// Programs that register their own subjects can call run_cli from main().

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ltlfuzz/buchi.hpp"
#include "ltlfuzz/engine.hpp"
#include "ltlfuzz/harness.hpp"
#include "ltlfuzz/ltl.hpp"
#include "ltlfuzz/monitor.hpp"
#include "ltlfuzz/report.hpp"
#include "ltlfuzz/subjects.hpp"

namespace ltlfuzz {

namespace exit_code {
inline constexpr int kViolation = 0;  // also: validation confirmed
inline constexpr int kSpurious = 1;
inline constexpr int kConfig = 2;
inline constexpr int kEmptyLanguage = 3;
inline constexpr int kMismatch = 4;
inline constexpr int kNoViolation = 10;  // budget exhausted, or trace still running
}  // namespace exit_code

namespace cli {

namespace fs = std::filesystem;

// Error that carries its exit status to run_cli.
struct Exit {
  int code;
  std::string message;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Exit{exit_code::kConfig, "cannot read '" + path + "'"};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Exit{exit_code::kConfig, "cannot write '" + path.string() + "'"};
  out << content;
}

inline FormulaPtr load_property(const std::string& text, const std::string& origin) {
  try {
    return parse_ltl(text);
  } catch (const ParseError& e) {
    throw Exit{exit_code::kConfig, origin + ":" + std::to_string(e.line()) + ":" + std::to_string(e.column()) +
                                       ": " + e.what()};
  }
}

inline PropositionMap load_map(const std::string& text, const std::string& origin) {
  try {
    return PropositionMap::parse(text);
  } catch (const ConfigError& e) {
    throw Exit{exit_code::kConfig, origin + ": " + e.what()};
  }
}

inline const SubjectInfo& find_subject(const std::string& name) {
  if (const auto* info = SubjectRegistry::instance().find(name)) return *info;
  std::string known;
  for (const auto& n : SubjectRegistry::instance().names()) known += (known.empty() ? "" : ", ") + n;
  throw Exit{exit_code::kConfig, "unknown subject '" + name + "' (available: " + known + ")"};
}

/// Seed corpus: `*.bin` files hold serialized inputs, anything else one message per line.
inline std::vector<Input> load_seeds(const std::string& dir) {
  if (!fs::is_directory(dir)) throw Exit{exit_code::kConfig, "seed directory '" + dir + "' does not exist"};
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Input> seeds;
  for (const auto& f : files) {
    std::string bytes = read_file(f.string());
    if (f.extension() == ".bin") {
      try {
        seeds.push_back(deserialize_input(bytes));
      } catch (const ConfigError& e) {
        throw Exit{exit_code::kConfig, f.string() + ": " + e.what()};
      }
      continue;
    }
    Input in;
    std::istringstream lines(bytes);
    for (std::string line; std::getline(lines, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) in.messages.push_back(line);
    }
    seeds.push_back(std::move(in));
  }
  return seeds;
}

// -- fuzz -------------------------------------------------------------------

struct FuzzOptions {
  std::string subject;
  std::string property;
  std::string map;
  double total_time = 300;
  double target_time = 20;
  bool liveness = false;
  std::uint64_t rng_seed = 0;
  bool rng_seed_given = false;
  std::string seed_dir;
  std::string out;
  bool unguided = false;
  unsigned workers = 1;
  std::string preset = "desk";
  std::uint64_t max_execs = 0;
  bool wall_clock = false;
  double exec_cost = 1e-3;
  bool total_given = false;
  bool target_given = false;
};

inline int cmd_fuzz(const FuzzOptions& o, std::ostream& out, std::ostream& err) {
  const SubjectInfo& info = find_subject(o.subject);
  const std::string property_text = o.property.empty() ? info.property : read_file(o.property);
  const std::string map_text = o.map.empty() ? info.map_json : read_file(o.map);
  const bool liveness = o.liveness || (o.property.empty() && info.liveness);
  FormulaPtr phi = load_property(property_text, o.property.empty() ? "<" + info.name + " property>" : o.property);
  PropositionMap map = load_map(map_text, o.map.empty() ? "<" + info.name + " map>" : o.map);

  CampaignConfig cfg = o.preset == "desk" ? CampaignConfig{} : CampaignConfig::production_preset();
  if (o.total_given) cfg.total_time = o.total_time;
  if (o.target_given) cfg.target_time = o.target_time;
  else cfg.target_time = std::min(cfg.target_time, cfg.total_time);
  cfg.liveness = liveness;
  cfg.unguided = o.unguided;
  cfg.workers = o.workers;
  cfg.max_executions = o.max_execs;
  cfg.wall_clock = o.wall_clock;
  cfg.exec_cost = o.exec_cost;
  cfg.rng_seed = o.rng_seed_given ? o.rng_seed : (std::uint64_t{std::random_device{}()} << 32 | std::random_device{}());
  out << "rng_seed=" << cfg.rng_seed << "\n";

  std::vector<Input> seeds;
  if (!o.seed_dir.empty()) seeds = load_seeds(o.seed_dir);

  BuchiAutomaton automaton = translate_negation(phi);
  for (const auto& w : automaton.warnings()) err << "warning: " << w << "\n";

  const fs::path dir(o.out);
  std::error_code ec;
  for (const char* sub : {"seeds", "queue", "counterexamples"})
    if (!ec) fs::create_directories(dir / sub, ec);
  if (ec) throw Exit{exit_code::kConfig, "cannot create output directory '" + o.out + "': " + ec.message()};
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "seed-%04zu.bin", i + 1);
    write_file(dir / "seeds" / name, serialize_input(seeds[i]));
  }
  std::ofstream log(dir / "campaign.log", std::ios::binary);
  std::ofstream stats(dir / "stats", std::ios::binary);
  CampaignIo io{&log, &stats, "subject=" + info.name + "@" + info.version};

  FuzzOutcome outcome;
  try {
    outcome = fuzz(info.make, automaton, map, cfg, io, std::move(seeds));
  } catch (const EmptyLanguageError& e) {
    throw Exit{exit_code::kEmptyLanguage, std::string("empty language: ") + e.what()};
  } catch (const ConfigError& e) {
    throw Exit{exit_code::kConfig, e.what()};
  }

  std::string index;
  for (std::size_t i = 0; i < outcome.pool.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "tuple-%04zu.bin", i + 1);
    write_file(dir / "queue" / name, serialize_input(outcome.pool[i].seed));
    index += std::string(name) + " " + outcome.pool[i].key() + " prefix=" +
             std::to_string(outcome.pool[i].prefix.size()) + "\n";
  }
  write_file(dir / "queue" / "index", index);

  out << "executions=" << outcome.executions << " pool=" << outcome.pool.size()
      << " best_l_a=" << distance_to_string(outcome.best_distance) << " spurious=" << outcome.spurious << "\n";
  if (!outcome.counterexample) {
    out << "no violation found within the budget\n";
    return exit_code::kNoViolation;
  }
  auto target = info.make();
  ReportHeader header{info.name, info.version, property_text, map.digest(), liveness, cfg.rng_seed};
  Report report = make_report(*outcome.counterexample, header, target->location_graph());
  const fs::path report_path = dir / "counterexamples" / "counterexample-0001.json";
  write_file(report_path, report_to_json(report).dump(2) + "\n");
  out << "violation: " << report.verdict << "\n";
  out << "report: " << report_path.string() << "\n";
  return exit_code::kViolation;
}

// -- translate --------------------------------------------------------------

inline int cmd_translate(const std::string& path, bool no_negate, bool as_json, std::ostream& out,
                         std::ostream& err) {
  FormulaPtr phi = load_property(read_file(path), path);
  BuchiAutomaton positive = translate(to_nnf(phi));
  BuchiAutomaton negative = translate_negation(phi);
  const BuchiAutomaton& shown = no_negate ? positive : negative;
  for (const auto& w : shown.warnings()) err << "warning: " << w << "\n";
  out << (as_json ? to_json(shown).dump(2) + "\n" : dump_text(shown));
  if (empty_language(shown)) {
    err << "empty language: " << (no_negate ? "the formula is unsatisfiable" : "the property holds on every trace")
        << "\n";
    return exit_code::kEmptyLanguage;
  }
  if (empty_language(no_negate ? negative : positive)) {
    err << "empty language: " << (no_negate ? "the negated formula" : "the property")
        << " has no satisfying trace; the property is vacuous\n";
    return exit_code::kEmptyLanguage;
  }
  return 0;
}

// -- check-trace ------------------------------------------------------------

inline int cmd_check_trace(const std::string& property_path, const std::string& map_path,
                           const std::string& trace_path, const std::string& subject, bool liveness,
                           std::ostream& out) {
  FormulaPtr phi = load_property(read_file(property_path), property_path);
  BuchiAutomaton automaton = translate_negation(phi);
  if (!map_path.empty()) automaton = automaton.with_universe(load_map(read_file(map_path), map_path).propositions());
  DistanceMap dm = accepting_distance(automaton);

  std::vector<std::string> names;
  std::map<std::string, LocationId> interned;
  const LocationGraph* graph = nullptr;
  std::unique_ptr<Target> target;
  if (!subject.empty()) {
    target = find_subject(subject).make();
    graph = &target->location_graph();
  }
  LocationResolver resolve = [&](const std::string& name) -> std::optional<LocationId> {
    if (graph) return graph->find(name);
    auto [it, inserted] = interned.try_emplace(name, static_cast<LocationId>(names.size()));
    if (inserted) names.push_back(name);
    return it->second;
  };
  std::vector<Event> events;
  try {
    events = parse_trace(read_file(trace_path), resolve);
  } catch (const TraceFormatError& e) {
    throw Exit{exit_code::kConfig, trace_path + ": " + e.what()};
  }
  Monitor monitor(automaton, dm, liveness ? MonitorMode::Liveness : MonitorMode::Safety);
  try {
    for (std::size_t i = 0; i < events.size() && monitor.verdict().running(); ++i) monitor.observe(events[i]);
  } catch (const MonitorError& e) {
    throw Exit{exit_code::kConfig, trace_path + ": " + e.what()};
  }
  out << dump_trace(monitor.trace(), monitor.verdict(),
                    [&](LocationId l) { return graph ? graph->name(l) : names.at(l); });
  return monitor.verdict().running() ? exit_code::kNoViolation : exit_code::kViolation;
}

// -- validate ---------------------------------------------------------------

inline int cmd_validate(const std::string& report_path, const std::string& map_path, std::size_t k,
                        std::ostream& out, std::ostream& err) {
  Report report;
  try {
    report = report_from_json(nlohmann::json::parse(read_file(report_path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Exit{exit_code::kConfig, report_path + ": not a report: " + e.what()};
  } catch (const ConfigError& e) {
    throw Exit{exit_code::kConfig, report_path + ": " + e.what()};
  }
  const SubjectInfo& info = find_subject(report.header.subject);
  if (info.version != report.header.subject_version)
    throw Exit{exit_code::kMismatch, "subject version mismatch: report has " + report.header.subject_version +
                                         ", build has " + info.version};
  PropositionMap map = load_map(map_path.empty() ? info.map_json : read_file(map_path),
                                map_path.empty() ? "<" + info.name + " map>" : map_path);
  if (map.digest() != report.header.map_digest)
    throw Exit{exit_code::kMismatch, "proposition map digest mismatch: report has " +
                                         format_digest(report.header.map_digest) + ", map has " +
                                         format_digest(map.digest())};
  if (k == 0) throw Exit{exit_code::kConfig, "repetition count must be positive"};
  if (k == 1) err << "warning: k=1 only checks that the loop recurs once\n";

  FormulaPtr phi = load_property(report.header.property, report_path + " (property)");
  auto target = info.make();
  std::set<std::string> aps = atomic_propositions(*phi);
  ResolvedMap resolved;
  try {
    resolved = resolve_map(map, target->location_graph(), aps);
  } catch (const ConfigError& e) {
    throw Exit{exit_code::kConfig, e.what()};
  }
  std::vector<std::string> extra;
  for (const auto& p : map.propositions())
    if (!aps.count(p)) extra.push_back(p);
  BuchiAutomaton automaton = translate_negation(phi).with_universe(extra);
  DistanceMap dm = accepting_distance(automaton);
  ExecutionContext ctx{&automaton, &dm, &resolved,
                       report.header.liveness ? MonitorMode::Liveness : MonitorMode::Safety};

  ExecutionReport run = run_input(*target, report.input, ctx);
  const std::string trace =
      dump_trace(run.trace, run.verdict, [&](LocationId l) { return target->location_graph().name(l); });
  if (verdict_to_string(run.verdict) != report.verdict || trace != report.trace) {
    out << "replay: " << verdict_to_string(run.verdict) << "\n";
    throw Exit{exit_code::kMismatch, "replay mismatch: report says '" + report.verdict + "'"};
  }
  if (run.verdict.kind != VerdictKind::LivenessViolation) {
    out << "confirmed: replay reproduced " << report.verdict << "\n";
    return exit_code::kViolation;
  }
  LassoValidation v = validate_lasso(*target, report.input, run.trace, *run.verdict.lasso, ctx, k);
  out << (v.confirmed ? "confirmed" : "spurious") << ": recurrences=" << v.recurrences << " k=" << k
      << (v.used_fallback ? " (single-message fallback)" : "") << "\n";
  return v.confirmed ? exit_code::kViolation : exit_code::kSpurious;
}

}  // namespace cli

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"LTL-guided greybox fuzzer"};
  app.require_subcommand(1);

  cli::FuzzOptions fo;
  auto* fuzz_cmd = app.add_subcommand("fuzz", "Run a fuzzing campaign against a subject");
  fuzz_cmd->add_option("--subject", fo.subject, "Subject name")->required();
  fuzz_cmd->add_option("--property", fo.property, "LTL property file (default: the subject's own)");
  fuzz_cmd->add_option("--map", fo.map, "Proposition map file (default: the subject's own)");
  auto* total_opt = fuzz_cmd->add_option("--total-time", fo.total_time, "Campaign budget in seconds")
                        ->check(CLI::PositiveNumber);
  auto* target_opt = fuzz_cmd->add_option("--target-time", fo.target_time, "Budget per target location in seconds")
                         ->check(CLI::PositiveNumber);
  fuzz_cmd->add_flag("--liveness", fo.liveness, "Enable liveness (lasso) checking");
  auto* seed_opt = fuzz_cmd->add_option("--rng-seed", fo.rng_seed, "Random seed (default: generated and printed)");
  fuzz_cmd->add_option("--seed-dir", fo.seed_dir, "Initial corpus directory");
  fuzz_cmd->add_option("--out", fo.out, "Output directory")->required();
  fuzz_cmd->add_flag("--unguided", fo.unguided, "Coverage-guided baseline without automaton guidance");
  fuzz_cmd->add_option("--workers", fo.workers, "Worker threads")->check(CLI::PositiveNumber);
  fuzz_cmd->add_option("--preset", fo.preset, "Budget preset")->check(CLI::IsMember({"desk", "production", "paper"}));
  fuzz_cmd->add_option("--max-execs", fo.max_execs, "Stop after this many executions");
  fuzz_cmd->add_flag("--wall-clock", fo.wall_clock, "Measure budgets in wall time instead of virtual time");
  fuzz_cmd->add_option("--exec-cost", fo.exec_cost, "Virtual seconds charged per execution")
      ->check(CLI::PositiveNumber);

  std::string tr_path;
  bool no_negate = false, as_json = false;
  auto* tr_cmd = app.add_subcommand("translate", "Print the automaton of a property's negation");
  tr_cmd->add_option("property", tr_path, "LTL property file")->required();
  tr_cmd->add_flag("--no-negate", no_negate, "Translate the formula itself");
  tr_cmd->add_flag("--json", as_json, "Emit JSON instead of the text dump");

  std::string ct_property, ct_map, ct_trace, ct_subject;
  bool ct_liveness = false;
  auto* ct_cmd = app.add_subcommand("check-trace", "Replay a trace dump through a fresh monitor");
  ct_cmd->add_option("--property", ct_property, "LTL property file")->required();
  ct_cmd->add_option("--map", ct_map, "Proposition map file");
  ct_cmd->add_option("--trace", ct_trace, "Trace dump file")->required();
  ct_cmd->add_option("--subject", ct_subject, "Resolve locations against this subject's graph");
  ct_cmd->add_flag("--liveness", ct_liveness, "Enable lasso detection");

  std::string va_report, va_map;
  std::size_t va_k = 3;
  auto* va_cmd = app.add_subcommand("validate", "Re-check a counterexample report");
  va_cmd->add_option("report", va_report, "Counterexample report file")->required();
  va_cmd->add_option("--map", va_map, "Proposition map used by the campaign (default: the subject's own)");
  va_cmd->add_option("--k", va_k, "Loop repetitions for lasso validation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : exit_code::kConfig;
  }

  try {
    if (*fuzz_cmd) {
      fo.rng_seed_given = seed_opt->count() > 0;
      fo.total_given = total_opt->count() > 0;
      fo.target_given = target_opt->count() > 0;
      return cli::cmd_fuzz(fo, out, err);
    }
    if (*tr_cmd) return cli::cmd_translate(tr_path, no_negate, as_json, out, err);
    if (*ct_cmd) return cli::cmd_check_trace(ct_property, ct_map, ct_trace, ct_subject, ct_liveness, out);
    if (*va_cmd) return cli::cmd_validate(va_report, va_map, va_k, out, err);
  } catch (const cli::Exit& e) {
    err << "error: " << e.message << "\n";
    return e.code;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kConfig;
  }
  return exit_code::kConfig;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"ltlfuzz"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace ltlfuzz
