#pragma once

#include <iostream>
#include <ostream>

namespace stylesearch {

// Subcommands: prep, train-ae, embed, train-clf, evaluate, search, serve,
// synth. Returns the process exit status; failures are reported on `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
            std::ostream& err = std::cerr);

}  // namespace stylesearch
