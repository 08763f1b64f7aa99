#include "groom/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return groom::run_cli(argc, argv, std::cout, std::cerr);
}
