#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cpx {

// Runs one `cpx` command. Returns 0 on success, 1 on usage errors and 2 on
// numeric failures.
int run_pipeline(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_pipeline(int argc, char** argv);

}  // namespace cpx
