#include "cpx/cli.hpp"

int main(int argc, char** argv) { return cpx::run_pipeline(argc, argv); }
