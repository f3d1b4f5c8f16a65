#include <iostream>

#include "chronomap/service/cli.hpp"

int main(int argc, char** argv) {
    return chronomap::service::run_cli(argc, argv, std::cin, std::cout, std::cerr);
}
