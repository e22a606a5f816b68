#include "cli.hpp"

int main(int argc, char** argv) {
    return avq::cli::run(argc, argv);
}
