#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mvgf {

/// One measured quantity inside a criterion. Reported checks (asserted =
/// false) are printed but do not decide the outcome.
struct SubCheck {
  std::string label;
  bool pass = false;
  bool asserted = true;
  std::string detail;
};

struct CriterionResult {
  int id = 0;
  std::string title;
  std::vector<SubCheck> checks;
  double seconds = 0.0;

  /// All asserted sub-checks pass.
  bool pass() const;
};

struct VerifyOptions {
  double half_width = 12.0;
  std::size_t n_cells = 1200;
  std::uint64_t master_seed = 20240601;
  /// Martingale test ensembles.
  std::size_t linear_paths = 10000;
  std::size_t nonlinear_paths = 500;
  /// Conditional-rate test: paths per model and branches per path.
  std::size_t rate_paths = 40;
  std::size_t branches = 1000;
  /// 0 uses the hardware concurrency.
  unsigned threads = 0;
  /// Progress lines while running; null for silence.
  std::ostream* log = nullptr;
};

constexpr int kCriterionCount = 7;

std::string criterion_title(int id);

/// Runs one acceptance criterion (1..7). Numerical failures inside a check are
/// recorded as failed sub-checks, not thrown.
CriterionResult verify_criterion(int id, const VerifyOptions& options = {});

std::vector<CriterionResult> verify_all(const VerifyOptions& options = {});

/// One "criterion N ... PASS|FAIL" line per result, sub-checks indented below.
void write_verify_table(std::ostream& out, const std::vector<CriterionResult>& results, bool details = true);

}  // namespace mvgf
