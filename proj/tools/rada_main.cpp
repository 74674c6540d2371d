#include <csignal>
#include <iostream>
#include <string>
#include <vector>

#include "rada/cli.hpp"

namespace {

extern "C" void on_sigint(int) { rada::cli::interrupt_flag().store(true); }

}  // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, on_sigint);
    std::vector<std::string> args(argv + 1, argv + argc);
    return rada::cli::run(args, std::cout, std::cerr);
}
