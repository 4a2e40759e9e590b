// samples/simrec_demo.cpp

// Copyright 2026 The kboost Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Simulates a recognizer with known per-bin context exponents, scores its
// output and fits k back.
//
//   simrec_demo [k_hp] [k_lp] [seed]

#include <cstdlib>
#include <iostream>

#include "kboost/kboost.hpp"

int main(int argc, char** argv) {
  using namespace kboost;
  try {
    SimConfig cfg;
    if (argc > 1) cfg.k_per_bin["HP"] = std::atof(argv[1]);
    if (argc > 2) cfg.k_per_bin["LP"] = std::atof(argv[2]);
    if (argc > 3) cfg.seed = std::strtoull(argv[3], nullptr, 10);

    const SnrGrid grid;
    const auto sim = simulate(cfg, grid);
    const auto cells = score_cells(with_hypotheses(sim), sim.bins, cfg.system);

    std::cout << "snr";
    for (const auto& l : sim.bins.labels()) std::cout << '\t' << l;
    std::cout << '\n';
    for (int snr : grid.values()) {
      std::cout << snr;
      for (const auto& l : sim.bins.labels())
        for (const auto& c : cells)
          if (c.bin == l && c.snr == Snr(snr)) std::cout << '\t' << percent(c.e);
      std::cout << '\n';
    }

    FitKOptions opts;
    opts.bootstrap.n_boot = 999;
    opts.bootstrap.seed = cfg.seed;
    std::cout << "\nbin\ttrue k\tfitted k\t95% CI\n";
    for (const std::string bin : {"HP", "LP"}) {
      const auto fit = estimate_k(pair_points(cells, cfg.system, cfg.partition, bin, "ZP"), opts);
      std::cout << bin << '\t' << format_fixed(cfg.k(bin), 2) << '\t' << format_fixed(fit.k, 3)
                << "\t[" << format_fixed(fit.ci_low, 3) << ", " << format_fixed(fit.ci_high, 3) << "]\n";
    }
  } catch (const Error& e) {
    std::cerr << "simrec_demo: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
