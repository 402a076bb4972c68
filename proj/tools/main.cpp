#include "bpe/cli.hpp"

int main(int argc, char** argv) { return bpe::cli::dispatch(argc, argv); }
