#include "gpr3d/cli.hpp"

int main(int argc, char** argv) { return gpr3d::cli_main(argc, argv); }
