#include <iostream>

#include "cfset/cli.hpp"

int main(int argc, char** argv) {
    cfset::cli::init_logging();
    return cfset::cli::run({argv, argv + argc}, std::cout, std::cerr);
}
