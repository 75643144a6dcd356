// Acceptance run: executes the fourteen built-in verification criteria at
// their stated sample sizes and reports one pass/fail verdict per criterion,
// with each underlying check's measured value and tolerance.
//
// Set COUPLING_LAB_ACCEPTANCE_SUITE=fast to run the reduced-N smoke variant
// during development; the default is the full suite.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <iostream>
#include <string>

#include "couplab/verify.hpp"

TEST_CASE("acceptance criteria") {
  const char* env = std::getenv("COUPLING_LAB_ACCEPTANCE_SUITE");
  bool fast = env && std::string(env) == "fast";
  std::cout << "Desk-scale MC settings: dt=1e-3 (or BesselClock with bridge correction), "
               "N per point as stated, 8-core target.\n";
  std::cout << "suite: " << (fast ? "fast" : "full") << "\n\n";
  auto reports =
      couplab::run_verification(fast ? couplab::VerifySuite::Fast : couplab::VerifySuite::Full);
  couplab::print_verification(std::cout, reports);
  REQUIRE(reports.size() == 14);
  for (const auto& rep : reports) {
    INFO("criterion " << rep.index << ": " << rep.title);
    for (const auto& c : rep.checks) {
      INFO(c.name << " measured " << c.measured << " tolerance " << c.tolerance);
      CHECK(c.pass);
    }
    CHECK(rep.pass());
  }
}
