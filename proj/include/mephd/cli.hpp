// Command-line front end. cli_main is the real entry point; the binary's
// main() forwards to it, and tests drive it directly with a captured stream.
//
// Exit codes: 0 success, 2 usage or input errors, 3 solver non-convergence
// (with a JSON error body on the output stream).

#ifndef MEPHD_CLI_HPP
#define MEPHD_CLI_HPP

#include <iostream>

namespace mephd {

int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout,
             std::ostream& err = std::cerr);

} // namespace mephd

#endif
