#include "transdet/cli.hpp"

int main(int argc, char** argv) { return transdet::cli::main(argc, argv); }
