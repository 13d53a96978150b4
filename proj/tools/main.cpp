#include "lehgr/cli.hpp"

int main(int argc, char** argv) { return lehgr::run_cli(argc, argv); }
