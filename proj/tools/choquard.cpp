#include "choquard/cli.hpp"

int main(int argc, char** argv) { return choquard::cli::main(argc, argv); }
