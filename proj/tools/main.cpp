#include <iostream>

#include "spibb/cli.hpp"

int main(int argc, char** argv) { return spibb::cli::run(argc, argv, std::cout, std::cerr); }
