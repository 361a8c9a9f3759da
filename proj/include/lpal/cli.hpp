#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lpal {

// Exit codes: 0 success, 1 configuration or input error, 2 runtime error.
int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lpal
