#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace analogy::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kTrainingAbort = 3 };

// Entry point for the `analogy` tool. `args` excludes the program name.
//   generate  --config --count --seed --out [--raster HxW] [--shapes a,b]
//   train     --mode --data --out [--batch --epochs --k --preset-subsample
//             --cross-shapes --seed --lr ...]
//   eval      --data [--ckpt] [--validate-only]
//   split     --data --out [--cross-shapes --seed]
//   report    --run DIR... [--out FILE]
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace analogy::cli
