#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "advpatch/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Natural-looking ensemble adversarial patches against toy person detectors"};
  app.require_subcommand(1);

  std::string config, out, patch, dataset, spec, csv = "theory.csv";
  int trials = 1000;
  std::uint64_t seed = 0;

  auto* gen = app.add_subcommand("generate", "train a patch");
  gen->add_option("--config", config, "run configuration (JSON)")->required();
  gen->add_option("--out", out, "output directory");

  auto* ev = app.add_subcommand("eval", "score a patch on a dataset");
  ev->add_option("--patch", patch, "patch PNG")->required();
  ev->add_option("--dataset", dataset, "dataset manifest (JSON)")->required();
  ev->add_option("--config", config, "run configuration (JSON)")->required();
  ev->add_option("--out", out, "output directory");

  auto* th = app.add_subcommand("verify-theory", "check the ensemble theory numerically");
  th->add_option("--trials", trials, "Jensen trials")->check(CLI::PositiveNumber);
  th->add_option("--seed", seed, "RNG seed");
  th->add_option("--out", csv, "CSV output path");

  auto* ms = app.add_subcommand("make-scenes", "render a synthetic dataset");
  ms->add_option("--spec", spec, "scene spec (JSON)")->required();
  ms->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : advpatch::kExitInput;
  }

  if (*gen) return advpatch::cmd_generate(config, out, std::cerr);
  if (*ev) return advpatch::cmd_eval(patch, dataset, config, out, std::cerr);
  if (*th) return advpatch::cmd_verify_theory(trials, seed, csv, std::cerr);
  return advpatch::cmd_make_scenes(spec, out, std::cerr);
}
