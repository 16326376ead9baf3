// flashexp: generate attention instances, run kernels against the
// double-precision oracle, and sweep the hidden-dimension grid.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "flashexp/commands.hpp"

namespace {

using flashexp::Dtype;
using flashexp::OutFormat;

// Enum-valued flags are read as strings and converted after parsing.
struct Choices {
  std::string kernel = "flash2-expmul";
  std::string exp = "accurate";
  std::string dtype = "fp32";
  std::optional<std::string> run_dtype;
  std::string out = "json";
};

void apply(const Choices& c, flashexp::RunConfig& cfg) {
  cfg.kernel = flashexp::parse_kernel(c.kernel);
  cfg.exp_mode = flashexp::parse_exp_mode(c.exp);
  cfg.dtype = flashexp::parse_dtype(c.dtype);
  cfg.out_format = c.out == "csv" ? OutFormat::Csv : OutFormat::Json;
}

void add_paths(CLI::App* cmd, flashexp::TensorPaths& paths) {
  cmd->add_option("--q", paths.q, "Query tensor file")->required();
  cmd->add_option("--k", paths.k, "Key tensor file")->required();
  cmd->add_option("--v", paths.v, "Value tensor file")->required();
}

void add_shape(CLI::App* cmd, flashexp::RunConfig& cfg) {
  cmd->add_option("--dim", cfg.d, "Hidden dimension d")->check(CLI::PositiveNumber);
  cmd->add_option("--seqlen", cfg.seqlen, "Number of key/value rows N")->check(CLI::PositiveNumber);
  cmd->add_option("--queries", cfg.queries, "Number of query rows")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", cfg.seed, "Generator seed");
  cmd->add_flag("--stress", cfg.stress, "Widen scores and shrink values to hit clip and flush paths");
}

void add_kernel_flags(CLI::App* cmd, flashexp::RunConfig& cfg, Choices& c) {
  cmd->add_option("--exp", c.exp, "Exponential for baseline/flash2")->check(CLI::IsMember({"accurate", "pwl"}));
  cmd->add_flag("--scale", cfg.scale_by_inv_sqrt_d, "Scale scores by 1/sqrt(d)");
  cmd->add_option("--out", c.out, "Report format")->check(CLI::IsMember({"json", "csv"}));
  cmd->add_option("--threads", cfg.threads, "Query-level worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FlashAttention-2 kernels with fused ExpMul operators"};
  app.require_subcommand(1);

  flashexp::RunConfig cfg;
  flashexp::TensorPaths paths;
  Choices choices;

  auto* gen = app.add_subcommand("gen", "Write seeded Q, K, V tensor files");
  add_paths(gen, paths);
  add_shape(gen, cfg);
  gen->add_option("--dtype", choices.dtype, "Element format")->check(CLI::IsMember({"fp32", "bf16"}));

  auto* run = app.add_subcommand("run", "Run one kernel and report accuracy against the oracle");
  add_paths(run, paths);
  add_kernel_flags(run, cfg, choices);
  run->add_option("--kernel", choices.kernel, "Kernel")->check(CLI::IsMember({"baseline", "flash2", "flash2-expmul"}));
  run->add_option("--dtype", choices.run_dtype, "Round inputs to this format before running")
      ->check(CLI::IsMember({"fp32", "bf16"}));
  std::optional<std::string> save;
  run->add_option("--save", save, "Write the kernel output as a tensor file");

  auto* sweep = app.add_subcommand("sweep", "CSV accuracy table over d x dtype x kernel");
  flashexp::SweepConfig sweep_cfg;
  sweep->add_option("--dim", sweep_cfg.dims, "Hidden dimensions (repeatable)")->check(CLI::PositiveNumber);
  sweep->add_option("--seqlen", cfg.seqlen, "Number of key/value rows N")->check(CLI::PositiveNumber);
  sweep->add_option("--queries", cfg.queries, "Number of query rows")->check(CLI::PositiveNumber);
  sweep->add_option("--seed", cfg.seed, "Generator seed");
  sweep->add_flag("--stress", cfg.stress, "Widen scores and shrink values to hit clip and flush paths");
  sweep->add_option("--exp", choices.exp, "Exponential for baseline/flash2")->check(CLI::IsMember({"accurate", "pwl"}));
  sweep->add_flag("--scale", cfg.scale_by_inv_sqrt_d, "Scale scores by 1/sqrt(d)");
  sweep->add_option("--threads", cfg.threads, "Query-level worker threads")->check(CLI::PositiveNumber);
  bool no_timing = false;
  sweep->add_flag("--no-timing", no_timing, "Write 0 in the seconds column");

  auto* cmp = app.add_subcommand("compare", "Score an external output tensor against the oracle");
  add_paths(cmp, paths);
  std::string result;
  cmp->add_option("--result", result, "Output tensor to score")->required();
  cmp->add_flag("--scale", cfg.scale_by_inv_sqrt_d, "Scale scores by 1/sqrt(d)");
  cmp->add_option("--out", choices.out, "Report format")->check(CLI::IsMember({"json", "csv"}));

  CLI11_PARSE(app, argc, argv);
  apply(choices, cfg);

  if (*gen) return flashexp::cmd_gen(cfg, paths, std::cerr);
  if (*run) {
    std::optional<std::filesystem::path> save_path;
    if (save) save_path = *save;
    std::optional<Dtype> run_dtype;
    if (choices.run_dtype) run_dtype = flashexp::parse_dtype(*choices.run_dtype);
    return flashexp::cmd_run(cfg, paths, run_dtype, std::cout, std::cerr, save_path);
  }
  if (*sweep) {
    cfg.timing = !no_timing;
    sweep_cfg.base = cfg;
    return flashexp::cmd_sweep(sweep_cfg, std::cout, std::cerr);
  }
  return flashexp::cmd_compare(cfg, paths, result, std::cout, std::cerr);
}
