#include "qspin/cli.hpp"

int main(int argc, char** argv) { return qspin::run_cli(argc, argv); }
