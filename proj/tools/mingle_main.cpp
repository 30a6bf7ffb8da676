#include "mingle/cli.hpp"

int main(int argc, char** argv) { return mingle::cli::run(argc, argv); }
