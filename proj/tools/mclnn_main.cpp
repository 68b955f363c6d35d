#include "mclnn/cli.hpp"

int main(int argc, char** argv) { return mclnn::cli::run(argc, argv); }
