#include <iostream>

#include "bichain/cli.hpp"

int main(int argc, char** argv) { return bichain::run_cli(argc, argv, std::cout, std::cerr); }
