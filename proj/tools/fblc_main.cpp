#include <iostream>

#include "fblc/cli/commands.hpp"

int main(int argc, char** argv) { return fblc::cli::run_cli(argc, argv, std::cout, std::cerr); }
