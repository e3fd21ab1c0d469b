#include "mardp/cli.hpp"

int main(int argc, char** argv) { return mardp::cli::run(argc, argv); }
