#include "app.hpp"

int main(int argc, char** argv) { return nbsigma::cli::run(argc, argv); }
