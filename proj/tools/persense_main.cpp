#include "persense/cli.hpp"

int main(int argc, char** argv) {
    return persense::cli::main_entry(argc, argv);
}
