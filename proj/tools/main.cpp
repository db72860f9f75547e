#include "stripekit/cli.hpp"

int main(int argc, char** argv) { return stripekit::cli::run(argc, argv); }
