#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fedclip {

struct GradcheckResult {
  std::string name;
  double relative_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return relative_error < tolerance; }
};

/// Compares backward() against central differences (eps 1e-5) for the
/// primitive ops and for both training losses on a 2-layer encoder
/// (D = 16, B = 8).
std::vector<GradcheckResult> run_gradcheck_suite(unsigned long long seed = 7);

/// Prints one line per check; true when all pass.
bool report_gradcheck(const std::vector<GradcheckResult>& results, std::ostream& out);

}  // namespace fedclip
