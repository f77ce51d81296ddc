#include "pairvc/cli/commands.hpp"

int main(int argc, char** argv) { return pairvc::cli::run_cli(argc, argv); }
