#include "occultist/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return occultist::cli::run_cli(argc, argv, std::cout, std::cerr);
}
