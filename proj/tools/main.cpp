#include "coxmi/cli.hpp"

int main(int argc, char** argv) { return coxmi::run_cli(argc, argv); }
