#include "qmfg/cli_io.hpp"

int main(int argc, char** argv) { return qmfg::main_cli(argc, argv); }
