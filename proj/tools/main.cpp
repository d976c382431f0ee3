#include "stylesearch/cli.hpp"

int main(int argc, char** argv) { return stylesearch::run_cli(argc, argv); }
