#include <iostream>

#include "haste/cli.hpp"

int main(int argc, char** argv) {
    return haste::cli::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
