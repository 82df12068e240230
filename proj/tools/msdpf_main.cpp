#include "msdpf/cli.hpp"

int main(int argc, char** argv) { return msdpf::cli::main_entry(argc, argv); }
