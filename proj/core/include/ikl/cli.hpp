#pragma once

// Command-line front end. Subcommands:
//   train-teacher  denoising score matching on the configured dataset
//   distill        alternating score / generator training from a fresh or Tweedie init
//   refine         the same loop warm-started from --generator
//   sds            point-mass optimization against the teacher
//   oracle         closed-form check battery, written as CSV
//   sample         draws from a generator checkpoint
//   eval           energy distance between a generator and a dataset
//   plot           SVG scatter of generator or dataset samples
//
// Exit codes: 0 success, 1 usage / configuration / I/O error or failed
// oracle checks, 2 numerical divergence.

#include <iosfwd>
#include <string>
#include <vector>

namespace ikl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitDivergence = 2;

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ikl
