#include "qmeas/cli.hpp"

int main(int argc, char** argv) { return qmeas::cli_main(argc, argv); }
