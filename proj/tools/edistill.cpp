// SPDX-License-Identifier: Apache-2.0

#include "edistill/cli.hpp"

int main(int argc, char** argv) { return edistill::cli::run(argc, argv); }
