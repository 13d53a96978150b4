#pragma once

#include <string>
#include <vector>

namespace lehgr {

// Command-line front door: simulate, track, featurize, dataset build,
// dataset inspect, train, eval, infer. Returns 0 on success, 1 on usage
// errors, 2 on data/schema errors.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

}  // namespace lehgr
