#include <iostream>

#include "dfgc/cli.hpp"

int main(int argc, char** argv) { return dfgc::cli::run_cli(argc, argv, std::cout, std::cerr); }
