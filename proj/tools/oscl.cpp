#include "oscl/cli.hpp"

int main(int argc, char** argv) { return oscl::run_cli(argc, argv); }
