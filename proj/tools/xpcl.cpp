#include "pclmp/cli.hpp"

int main(int argc, char** argv) { return pclmp::cli::main(argc, argv); }
