#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace qgraph {

// Bad command line; exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string command;  // spectrum | phases | spacings | moments | equivalence | proposition | check
  std::filesystem::path graph;
  double lambda_max = 0.0;
  double capital_lambda = 0.0;
  std::vector<double> epsilons{0.05, 0.1, 0.2};
  std::vector<double> deltas{0.2, 0.1, 0.05};
  std::vector<double> direction;  // equivalence: u, default evenly spread and zero-sum
  int moment = 2;                 // moments: table for m = 0..moment
  int spacing_order = 1;
  std::size_t samples = 100000;
  std::size_t crossings = 5000;   // proposition: N per start
  std::size_t starts = 5;         // proposition: number of random x0
  std::size_t bond = 1;           // moments: A projects onto this bond (1-based)
  std::uint64_t seed = 42;
  double step = 0.0;              // 0 = module default
  std::string h = "gaussian:c=1,w=0.5";
  std::filesystem::path out = ".";
  unsigned workers = 1;
  std::vector<std::string> argv;  // echoed into every artifact
};

// Throws UsageError for unknown flags, a missing graph, non-numeric or
// out-of-range values and missing command-specific parameters. Returns
// a config with empty command when help was requested (help text in `help`).
ExperimentConfig parse_args(const std::vector<std::string>& args, std::string* help = nullptr);

// Runs one command and writes its artifacts. Returns the exit code
// (0 ok, 2 validation failure, 3 numerical failure); partial outputs are
// removed when a command fails.
int run(const ExperimentConfig& config, std::ostream& out, std::ostream& err);

// parse_args + run with exit code 1 for usage errors.
int cli_main(int argc, const char* const* argv);

}  // namespace qgraph
