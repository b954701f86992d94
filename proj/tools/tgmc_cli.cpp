#include "tgmc/harness.hpp"

#include <iostream>

int main(int argc, char** argv) { return tgmc::run_cli(argc, argv, std::cout, std::cerr); }
