#include "commands.hpp"

int main(int argc, char **argv) { return snapture::cli::run({argv + 1, argv + argc}); }
