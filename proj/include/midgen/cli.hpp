// Command-line front end. Subcommands:
//
//   train       run the minimax loop from a JSON config, writing config echo,
//               loss and timing tables, checkpoints, samples, metrics, and
//               critic field grids into the output directory
//   divergence  Monte-Carlo divergence estimate between two sample sources
//               (dataset specs or generator checkpoints), JSON result
//   field       evaluate a closed-form gaussian field or a checkpointed
//               network on a 2-D grid, one CSV per requested t
//   eval        two-sample metrics between two sample CSVs
//   datasets    draw from a target distribution into a sample CSV
//
// Exit codes: 0 success, 2 training halted on a non-finite loss, anything
// else nonzero with the reason on stderr. run_cli never throws.
#pragma once

#include <string>
#include <vector>

namespace midgen {

int run_cli(int argc, const char* const* argv);
// convenience for tests: args without the program name, natural order
int run_cli(const std::vector<std::string>& args);

}  // namespace midgen
