// Copyright 2026 The dturbo Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace dturbo::cli;
  CLI::App app{"dturbo: federated Bayesian compression simulator"};
  app.require_subcommand(1);

  RunArgs run;
  std::size_t threads = 0;
  std::uint64_t seed = 0;
  auto* run_cmd = app.add_subcommand("run", "run an experiment from a JSON config");
  run_cmd->add_option("config", run.config, "experiment config (JSON)")->required();
  auto* threads_opt = run_cmd->add_option("--threads", threads, "client worker threads (0: all cores)");
  auto* seed_opt = run_cmd->add_option("--seed", seed, "override fed.seed");
  run_cmd->add_option("--out", run.out, "output directory (also DTURBO_OUTPUT_DIR)");
  run_cmd->add_flag("--quiet", run.quiet, "no per-round progress");

  auto* oracle = app.add_subcommand("oracle", "regenerate reference values used by the tests");
  oracle->require_subcommand(1);
  GridArgs grid;
  auto* eg = oracle->add_subcommand("enumerate-grid", "exact grid marginals by enumeration");
  eg->add_option("--rows", grid.rows);
  eg->add_option("--cols", grid.cols);
  eg->add_option("--seed", grid.seed, "seed of the unary inputs");
  eg->add_option("--stay", grid.stay, "stay probability of both transition tables");
  eg->add_option("--out", grid.out, "output file (default stdout)");
  GradArgs grad;
  auto* gc = oracle->add_subcommand("grad-check", "finite-difference check of the client gradients");
  gc->add_option("--layers", grad.layers, "layer widths")->delimiter(',');
  gc->add_option("--states", grad.states);
  gc->add_option("--seed", grad.seed);
  gc->add_option("--tol", grad.tol);
  gc->add_option("--out", grad.out);
  KlArgs kl;
  auto* ks = oracle->add_subcommand("kl-grid-search", "closed-form q(s), q(rho) updates against grid minima");
  ks->add_option("--points", kl.points, "grid points over q(s)");
  ks->add_option("--out", kl.out);

  BenchArgs bench;
  auto* bc = app.add_subcommand("bench", "dense against cluster-tiled matrix multiply");
  bc->add_option("--mask", bench.mask, "mask file: one row of 0/1 per line");
  bc->add_option("--density", bench.density);
  bc->add_option("--size", bench.size, "square layer size");
  bc->add_option("--min-side", bench.min_side);
  bc->add_option("--max-side", bench.max_side);
  bc->add_option("--batch", bench.batch, "input rows");
  bc->add_option("--reps", bench.reps);
  bc->add_option("--seed", bench.seed);
  bc->add_option("--out", bench.out, "directory for bench.csv (also DTURBO_OUTPUT_DIR)");

  CLI11_PARSE(app, argc, argv);

  if (run_cmd->parsed()) {
    if (threads_opt->count()) run.threads = threads;
    if (seed_opt->count()) run.seed = seed;
    return cmd_run(run);
  }
  if (eg->parsed()) return cmd_enumerate_grid(grid);
  if (gc->parsed()) return cmd_grad_check(grad);
  if (ks->parsed()) return cmd_kl_grid_search(kl);
  if (bc->parsed()) return cmd_bench(bench);
  return kFailure;
}
