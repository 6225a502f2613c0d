#include <catch2/catch_amalgamated.hpp>

#include "lyap/catalog.hpp"
#include "lyap/clf.hpp"
#include "lyap/linstab.hpp"
#include "lyap/lyapcert.hpp"
#include "lyap/obstruct.hpp"
#include "lyap/simkit.hpp"

using namespace lyap;

namespace {

SamplePlan plan_for(const CatalogEntry& e) {
  SamplePlan p;
  p.dim = e.system.n;
  p.radial = 60;
  p.angular = 60;
  p.total = 3600;
  return p;
}

// the certificate that carries a claim about the given check
const ScalarCertificate* claiming(const CatalogEntry& e, const std::string& check) {
  for (const auto& c : e.certificates)
    if (c.claims.count(check)) return &c;
  return e.certificates.empty() ? nullptr : &e.certificates.front();
}

}  // namespace

// every expected verdict in the catalog is reproduced by the owning module
// at default tolerances
TEST_CASE("the catalog regression suite", "[catalog]") {
  for (const auto& e : catalog_all()) {
    const SamplePlan plan = plan_for(e);
    for (const auto& [check, expected] : e.expected) {
      INFO(e.id << " / " << check << " -> " << expected);
      if (check == "lyapunov") {
        const auto* v = claiming(e, check);
        REQUIRE(v != nullptr);
        auto rep = verify_lyapunov(*v, e.system, plan);
        CHECK(to_cstring(rep.verdict) == expected);
      } else if (check == "convex") {
        const auto* v = claiming(e, check);
        REQUIRE(v != nullptr);
        auto rep = verify_convexity(*v, plan, ConvexityMode::chord);
        CHECK(to_cstring(rep.verdict) == expected);
      } else if (check == "gconvex") {
        const auto* v = claiming(e, check);
        REQUIRE(v != nullptr);
        REQUIRE(v->diffeo);
        auto rep = verify_gconvex(*v, *v->diffeo, plan);
        CHECK(to_cstring(rep.verdict) == expected);
      } else if (check == "obstruction") {
        auto r = ray_alignment_search(e.system, plan);
        CHECK((r.verdict == ObstructionVerdict::violated ? "violated" : "clear") == expected);
      } else if (check == "clf_obstruction") {
        auto r = clf_obstruction_scan(e.system, plan);
        CHECK((r.verdict == ObstructionVerdict::violated ? "violated" : "clear") == expected);
      } else if (check == "empirical_gas") {
        auto rep = empirical_gas(autonomous_field(e.system), ring_points({0.5, 2.0}, 8), 200.0,
                                 1e-6);
        CHECK((rep.pass ? "pass" : "fail") == expected);
      } else if (check == "hautus") {
        Vec origin(static_cast<std::size_t>(e.system.n), 0.0);
        Mat a = jacobian(e.system, origin);
        Mat b = input_matrix_at(e.system, origin);
        auto r = hautus_test(a, b);
        CHECK((r.stabilizable ? "stabilizable" : "not_stabilizable") == expected);
      } else if (check == "clf") {
        const auto* v = claiming(e, check);
        REQUIRE(v != nullptr);
        bool ok = true;
        try {
          sontag_feedback(e.system, *v, plan);
        } catch (const PreconditionError&) {
          ok = false;
        }
        CHECK((ok ? "pass" : "fail") == expected);
      } else if (check == "blend_midpoint") {
        auto mid = hurwitz_blend(e.matrices.at("A1"), e.matrices.at("A2"), 0.5);
        CHECK((mid.max_real_part > 0.0 ? "unstable" : "stable") == expected);
      } else {
        FAIL("unhandled expected check: " << check);
      }
    }
  }
}
