#include "mimpact/cli/app.hpp"

int main(int argc, char** argv) { return mimpact::cli::main_entry(argc, argv); }
