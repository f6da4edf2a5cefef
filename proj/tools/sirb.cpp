#include "sirb/cli.hpp"

int main(int argc, char** argv) { return sirb::cli::main(argc, argv); }
