// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

// Writes the planted-scene corpus: {id}.png plus {id}.scene.json sidecars.

#include <CLI11.hpp>

#include <iostream>

#include "refsd/corpus.hpp"
#include "refsd/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic planted-scene corpus"};
  std::string out = "corpus";
  std::size_t count = refsd::corpus::kDefaultCorpusSize;
  std::uint64_t seed = refsd::corpus::kDefaultCorpusSeed;
  app.add_option("-o,--out", out, "Output directory")->capture_default_str();
  app.add_option("-n,--count", count, "Number of images")->capture_default_str();
  app.add_option("--seed", seed, "Corpus seed")->capture_default_str();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  try {
    const auto corpus = refsd::corpus::planted_corpus(count, seed);
    refsd::corpus::write_corpus(corpus, out);
    std::size_t subjects = 0;
    for (const auto& c : corpus) subjects += c.scene.subjects.size();
    std::cout << "wrote " << corpus.size() << " images (" << subjects << " planted subjects) to " << out << "\n";
  } catch (const refsd::Error& e) {
    std::cerr << "make_corpus: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
