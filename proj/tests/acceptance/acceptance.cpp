// Acceptance suite: one PASS/FAIL line per criterion, measured values below.
#include <iostream>
#include <vector>

#include "CLI11.hpp"
#include "mvgf/verify.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mvgf acceptance criteria"};
  std::vector<int> ids;
  mvgf::VerifyOptions opt;
  bool quiet = false;
  app.add_option("-c,--criterion", ids, "Criteria to run (default: all)")->check(CLI::Range(1, mvgf::kCriterionCount));
  app.add_option("--seed", opt.master_seed, "Master seed");
  app.add_option("--threads", opt.threads, "Worker threads (0: hardware concurrency)");
  app.add_flag("-q,--quiet", quiet, "No progress log on stderr");
  CLI11_PARSE(app, argc, argv);
  if (ids.empty()) {
    for (int id = 1; id <= mvgf::kCriterionCount; ++id) ids.push_back(id);
  }
  if (!quiet) opt.log = &std::cerr;

  std::vector<mvgf::CriterionResult> results;
  for (int id : ids) results.push_back(mvgf::verify_criterion(id, opt));
  mvgf::write_verify_table(std::cout, results);
  bool ok = true;
  for (const auto& r : results) ok = ok && r.pass();
  return ok ? 0 : 1;
}
