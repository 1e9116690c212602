#include <iostream>

#include "tactwin/cli.hpp"

int main(int argc, char** argv) { return tactwin::run_cli(argc, argv, std::cout, std::cerr); }
