#include "seqpi/cli.hpp"

int main(int argc, char** argv) { return seqpi::cli::run(argc, argv); }
