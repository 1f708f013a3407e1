#pragma once

// Counterexample report document. Carries enough provenance (property text,
// map digest, subject version) for a later validation run to detect drift.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ltlfuzz/engine.hpp"
#include "ltlfuzz/harness.hpp"
#include "ltlfuzz/monitor.hpp"

namespace ltlfuzz {

inline constexpr const char* kReportFormat = "ltlfuzz-counterexample/1";

struct ReportHeader {
  std::string subject;
  std::string subject_version;
  std::string property;
  std::uint64_t map_digest = 0;
  bool liveness = false;
  std::uint64_t rng_seed = 0;
};

struct Report {
  ReportHeader header;
  Input input;
  std::string verdict;
  std::vector<StateId> automaton_path;
  std::string trace;
  bool validated = false;
  std::optional<LassoValidation> validation;
  std::size_t snapshots = 0;
  std::uint64_t execution = 0;
};

inline std::string format_digest(std::uint64_t d) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(d));
  return buf;
}

inline nlohmann::ordered_json report_to_json(const Report& r) {
  nlohmann::ordered_json j;
  j["format"] = kReportFormat;
  j["subject"] = r.header.subject;
  j["subject_version"] = r.header.subject_version;
  j["property"] = r.header.property;
  j["map_digest"] = format_digest(r.header.map_digest);
  j["liveness"] = r.header.liveness;
  j["rng_seed"] = r.header.rng_seed;
  j["verdict"] = r.verdict;
  j["automaton_path"] = r.automaton_path;
  auto msgs = nlohmann::ordered_json::array();
  for (const auto& m : r.input.messages) msgs.push_back(to_hex(m));
  j["input"] = std::move(msgs);
  j["trace"] = r.trace;
  j["validated"] = r.validated;
  if (r.validation) {
    j["validation"] = {{"confirmed", r.validation->confirmed},
                       {"recurrences", r.validation->recurrences},
                       {"fallback", r.validation->used_fallback}};
  }
  j["snapshots"] = r.snapshots;
  j["execution"] = r.execution;
  return j;
}

inline Report report_from_json(const nlohmann::json& j) {
  Report r;
  try {
    if (j.at("format").get<std::string>() != kReportFormat) throw ConfigError("unsupported report format");
    r.header.subject = j.at("subject").get<std::string>();
    r.header.subject_version = j.at("subject_version").get<std::string>();
    r.header.property = j.at("property").get<std::string>();
    r.header.map_digest = std::stoull(j.at("map_digest").get<std::string>(), nullptr, 16);
    r.header.liveness = j.at("liveness").get<bool>();
    r.header.rng_seed = j.value("rng_seed", std::uint64_t{0});
    r.verdict = j.at("verdict").get<std::string>();
    r.automaton_path = j.at("automaton_path").get<std::vector<StateId>>();
    for (const auto& m : j.at("input")) r.input.messages.push_back(from_hex(m.get<std::string>()));
    r.trace = j.at("trace").get<std::string>();
    r.validated = j.value("validated", false);
    if (j.contains("validation")) {
      const auto& v = j.at("validation");
      r.validation = LassoValidation{v.at("confirmed").get<bool>(), v.at("recurrences").get<std::size_t>(),
                                     v.at("fallback").get<bool>()};
    }
    r.snapshots = j.value("snapshots", std::size_t{0});
    r.execution = j.value("execution", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed counterexample report: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ConfigError("malformed counterexample report: bad map digest");
  }
  return r;
}

inline Report make_report(const Counterexample& cx, const ReportHeader& header, const LocationGraph& graph) {
  Report r;
  r.header = header;
  r.input = cx.input;
  r.verdict = verdict_to_string(cx.verdict);
  r.automaton_path = cx.automaton_path;
  r.trace = dump_trace(cx.trace, cx.verdict, [&graph](LocationId l) { return graph.name(l); });
  r.validated = cx.validated;
  r.validation = cx.validation;
  r.snapshots = cx.snapshots;
  r.execution = cx.execution;
  return r;
}

}  // namespace ltlfuzz
