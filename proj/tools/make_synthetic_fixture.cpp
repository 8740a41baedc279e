// SPDX-License-Identifier: Apache-2.0

// Regenerates the bundled synthetic benchmark (dataset.jsonl + table.json).

#include <iostream>

#include <CLI11.hpp>

#include "ced/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write the synthetic contrastive-decoding fixture"};
  std::string dir = "data/synthetic";
  std::size_t records = 200;
  std::size_t pool = 6;
  app.add_option("--dir", dir)->capture_default_str();
  app.add_option("--records", records)->capture_default_str();
  app.add_option("--pool-per-type", pool)->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  ced::write_synthetic_fixture(ced::make_synthetic_fixture(records, pool), dir);
  std::cout << "wrote " << dir << "/dataset.jsonl and " << dir << "/table.json\n";
  return 0;
}
