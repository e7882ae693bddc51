#include "driftcast/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return driftcast::cli::run_cli(argc, argv, std::cout, std::cerr); }
