#include <iostream>

#include "mvreem/cli.hpp"

int main(int argc, char** argv) { return mvreem::run_cli(argc, argv, std::cout, std::cerr); }
