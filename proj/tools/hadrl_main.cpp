#include <iostream>

#include "hadrl/cli.hpp"

int main(int argc, char** argv) { return hadrl::cli::run(argc, argv, std::cout, std::cerr); }
