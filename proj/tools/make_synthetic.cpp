// Writes a noisy two-object limit-cycle series in the dataset CSV schema.
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "chaosnet/data.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic limit-cycle dataset"};
  std::string out;
  std::size_t rows = 2001;
  double noise = 0.01;
  std::uint64_t seed = 7;
  app.add_option("output", out, "Destination CSV")->required();
  app.add_option("--rows", rows, "Number of rows");
  app.add_option("--noise", noise, "Gaussian noise stddev");
  app.add_option("--seed", seed, "Random seed");
  CLI11_PARSE(app, argc, argv);

  std::ofstream f(out, std::ios::binary);
  if (!f) {
    std::cerr << "cannot write " << out << '\n';
    return 1;
  }
  chaosnet::write_csv(f, chaosnet::synthetic_limit_cycle(rows, noise, seed));
  return 0;
}
