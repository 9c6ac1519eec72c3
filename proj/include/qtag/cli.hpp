#pragma once

#include <cstdint>
#include <iosfwd>

#include "qtag/net.hpp"
#include "qtag/train.hpp"
#include "qtag/triplelearn.hpp"

namespace qtag {

// Everything a `triplelearn` run needs beyond its input files. The config
// file is "key = value" lines; '#' starts a comment.
struct RunConfig {
  TripleLearnConfig loop;
  TrainConfig train;
  ModelDims dims;
  ModelFlags flags;
  std::uint64_t split_seed = 42;
  std::uint64_t init_seed = 7;
  bool run_baseline = false;
};

// Unknown keys and unparsable values are ValidationErrors naming the line.
RunConfig parse_run_config(std::istream& in, RunConfig base = {});

int cli_main(int argc, char** argv);

}  // namespace qtag
