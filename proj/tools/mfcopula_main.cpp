#include "mfcopula/cli.hpp"

int main(int argc, char** argv) { return mfcopula::run_cli(argc, argv); }
