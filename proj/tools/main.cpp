#include "msmkit/cli.hpp"

int main(int argc, char** argv) { return msmkit::run_cli(argc, argv); }
