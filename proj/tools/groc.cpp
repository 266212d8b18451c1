#include <iostream>

#include "groc/cli.hpp"

int main(int argc, char** argv) {
    return groc::cli::run(argc, argv, std::cout, std::cerr);
}
