#pragma once

#include <iosfwd>

namespace chronomap::service {

/// Exit codes: 0 success, 1 user error (bad arguments, missing files,
/// invalid queries, undelivered answers), 2 internal error.
int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace chronomap::service
