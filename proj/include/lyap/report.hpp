#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "lyap/linalg.hpp"

namespace lyap {

enum class Verdict { pass, fail, inconclusive };

inline const char* to_cstring(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    default: return "inconclusive";
  }
}

// Result of one verification run. Margins follow the convention
// "margin <= 0 means the inequality holds with room"; worst_margin is the
// maximum over all samples, so a positive value pinpoints the violation.
struct CertificateReport {
  std::string check;
  Verdict verdict = Verdict::inconclusive;
  double worst_margin = 0.0;
  Vec witness;           // point where the worst margin occurred
  Vec witness_partner;   // second point of a chord pair, empty otherwise
  std::string context;   // which sub-inequality the witness violates
  long samples_used = 0;
  double tolerance = 0.0;
  std::uint64_t seed = 0;

  bool passed() const { return verdict == Verdict::pass; }
};

inline nlohmann::json to_json(const CertificateReport& r) {
  nlohmann::json j;
  j["check"] = r.check;
  j["verdict"] = to_cstring(r.verdict);
  j["margin"] = r.worst_margin;
  j["witness"] = r.witness;
  if (!r.witness_partner.empty()) j["witness_partner"] = r.witness_partner;
  if (!r.context.empty()) j["context"] = r.context;
  j["samples"] = r.samples_used;
  j["tolerance"] = r.tolerance;
  j["seed"] = r.seed;
  return j;
}

}  // namespace lyap
