#pragma once

// Subcommand bodies behind the flashexp CLI. Each returns the process exit
// code: 0 iff a report (or the requested files) was produced. Diagnostics go
// to `err`.

#include <charconv>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flashexp/generator.hpp"
#include "flashexp/kernels.hpp"
#include "flashexp/refmodel.hpp"
#include "flashexp/tensor.hpp"
#include "flashexp/tensor_file.hpp"

namespace flashexp {

enum class OutFormat : std::uint8_t { Json, Csv };

inline constexpr const char* kReportCsvHeader =
    "kernel,dtype,d,N,max_abs_err,max_rel_err,mean_abs_err,cosine_min,flushed,seconds";

struct RunConfig {
  KernelKind kernel = KernelKind::Flash2ExpMul;
  ExpMode exp_mode = ExpMode::Accurate;
  Dtype dtype = Dtype::FP32;
  std::size_t d = 16;
  std::size_t seqlen = 64;
  std::size_t queries = 8;
  std::uint64_t seed = 1;
  bool scale_by_inv_sqrt_d = false;
  bool stress = false;
  OutFormat out_format = OutFormat::Json;
  unsigned threads = 1;
  bool timing = true;  // false writes 0 into the seconds field
};

struct TensorPaths {
  std::filesystem::path q;
  std::filesystem::path k;
  std::filesystem::path v;
};

/// One row of a report table.
struct ReportRow {
  std::string kernel;
  Dtype dtype = Dtype::FP32;
  std::size_t d = 0;
  std::size_t seqlen = 0;
  std::size_t queries = 0;
  AccuracyReport report;
  double seconds = 0.0;
};

namespace detail {

/// Shortest round-trip decimal form; stable across runs.
[[nodiscard]] inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, res.ptr};
}

[[nodiscard]] inline std::string csv_line(const ReportRow& row) {
  std::string line = row.kernel;
  line += ',';
  line += to_string(row.dtype);
  line += ',' + std::to_string(row.d) + ',' + std::to_string(row.seqlen);
  line += ',' + format_double(row.report.max_abs_err);
  line += ',' + format_double(row.report.max_rel_err);
  line += ',' + format_double(row.report.mean_abs_err);
  line += ',' + format_double(row.report.cosine_similarity_min);
  line += ',' + std::to_string(row.report.flushed_count);
  line += ',' + format_double(row.seconds);
  return line;
}

[[nodiscard]] inline nlohmann::ordered_json to_json(const ReportRow& row) {
  return {{"kernel", row.kernel},
          {"dtype", std::string(to_string(row.dtype))},
          {"d", row.d},
          {"N", row.seqlen},
          {"queries", row.queries},
          {"max_abs_err", row.report.max_abs_err},
          {"max_rel_err", row.report.max_rel_err},
          {"mean_abs_err", row.report.mean_abs_err},
          {"cosine_min", row.report.cosine_similarity_min},
          {"flushed", row.report.flushed_count},
          {"seconds", row.seconds}};
}

inline void emit(const ReportRow& row, OutFormat format, std::ostream& out) {
  if (format == OutFormat::Csv) {
    out << kReportCsvHeader << '\n' << csv_line(row) << '\n';
  } else {
    out << to_json(row).dump(2) << '\n';
  }
}

[[nodiscard]] inline std::string kernel_label(KernelKind kind, ExpMode mode) {
  std::string label(to_string(kind));
  if (kind != KernelKind::Flash2ExpMul && mode == ExpMode::Pwl) label += "-pwl";
  return label;
}

/// Runs one kernel against the oracle and times the kernel alone.
[[nodiscard]] inline ReportRow evaluate(const RunConfig& cfg, const Tensor& q, const Tensor& k, const Tensor& v,
                                        Tensor* output = nullptr) {
  const KernelOptions opt{cfg.exp_mode, cfg.scale_by_inv_sqrt_d, cfg.threads};
  const auto start = std::chrono::steady_clock::now();
  KernelRun run = run_kernel(cfg.kernel, q, k, v, opt);
  const auto stop = std::chrono::steady_clock::now();

  ReportRow row;
  row.kernel = kernel_label(cfg.kernel, cfg.exp_mode);
  row.dtype = q.dtype();
  row.d = q.cols();
  row.seqlen = k.rows();
  row.queries = q.rows();
  row.report = compare(run.output, oracle_attention(q, k, v, cfg.scale_by_inv_sqrt_d), run.flushed);
  row.seconds = cfg.timing ? std::chrono::duration<double>(stop - start).count() : 0.0;
  if (output != nullptr) *output = std::move(run.output);
  return row;
}

[[nodiscard]] inline Instance load_instance(const TensorPaths& paths, std::optional<Dtype> dtype) {
  Instance inst{read_tensor_file(paths.q), read_tensor_file(paths.k), read_tensor_file(paths.v)};
  require_finite(inst.q, paths.q.string());
  require_finite(inst.k, paths.k.string());
  require_finite(inst.v, paths.v.string());
  if (dtype) {
    inst.q = cast(inst.q, *dtype);
    inst.k = cast(inst.k, *dtype);
    inst.v = cast(inst.v, *dtype);
  }
  return inst;
}

}  // namespace detail

[[nodiscard]] inline GenConfig gen_config(const RunConfig& cfg) {
  return {cfg.d, cfg.seqlen, cfg.queries, cfg.seed, cfg.dtype, cfg.stress};
}

/// Writes seeded Q, K, V tensor files.
inline int cmd_gen(const RunConfig& cfg, const TensorPaths& paths, std::ostream& err) {
  try {
    const Instance inst = generate(gen_config(cfg));
    write_tensor_file(paths.q, inst.q);
    write_tensor_file(paths.k, inst.k);
    write_tensor_file(paths.v, inst.v);
    return 0;
  } catch (const std::exception& e) {
    err << "flashexp gen: " << e.what() << '\n';
    return 1;
  }
}

/// Runs cfg.kernel on the given files and prints the accuracy report.
/// `dtype`, when set, rounds the loaded tensors to that format first.
inline int cmd_run(const RunConfig& cfg, const TensorPaths& paths, std::optional<Dtype> dtype, std::ostream& out,
                   std::ostream& err, const std::optional<std::filesystem::path>& save = std::nullopt) {
  try {
    const Instance inst = detail::load_instance(paths, dtype);
    Tensor output;
    const ReportRow row = detail::evaluate(cfg, inst.q, inst.k, inst.v, &output);
    if (save) write_tensor_file(*save, output);
    detail::emit(row, cfg.out_format, out);
    return 0;
  } catch (const std::exception& e) {
    err << "flashexp run: " << e.what() << '\n';
    return 1;
  }
}

/// Scores an externally produced output tensor against the oracle.
inline int cmd_compare(const RunConfig& cfg, const TensorPaths& paths, const std::filesystem::path& result,
                       std::ostream& out, std::ostream& err) {
  try {
    const Instance inst = detail::load_instance(paths, std::nullopt);
    const Tensor candidate = read_tensor_file(result);
    require_finite(candidate, result.string());
    if (candidate.rows() != inst.q.rows() || candidate.cols() != inst.v.cols()) {
      throw std::invalid_argument(result.string() + ": shape " + std::to_string(candidate.rows()) + "x" +
                                  std::to_string(candidate.cols()) + " does not match the attention output");
    }
    ReportRow row;
    row.kernel = "external";
    row.dtype = candidate.dtype();
    row.d = inst.q.cols();
    row.seqlen = inst.k.rows();
    row.queries = inst.q.rows();
    row.report = compare(candidate, oracle_attention(inst.q, inst.k, inst.v, cfg.scale_by_inv_sqrt_d));
    detail::emit(row, cfg.out_format, out);
    return 0;
  } catch (const std::exception& e) {
    err << "flashexp compare: " << e.what() << '\n';
    return 1;
  }
}

struct SweepConfig {
  std::vector<std::size_t> dims{16, 64, 256};
  std::vector<Dtype> dtypes{Dtype::FP32, Dtype::BF16};
  std::vector<KernelKind> kernels{KernelKind::BaselineLazy, KernelKind::Flash2Exact, KernelKind::Flash2ExpMul};
  RunConfig base;  // seqlen, queries, seed, exp mode, flags
};

/// One instance per (dtype, d), shared by every kernel in that cell.
[[nodiscard]] inline std::vector<ReportRow> sweep(const SweepConfig& cfg) {
  std::vector<ReportRow> rows;
  for (const KernelKind kernel : cfg.kernels) {
    for (const Dtype dtype : cfg.dtypes) {
      for (const std::size_t d : cfg.dims) {
        RunConfig run = cfg.base;
        run.kernel = kernel;
        run.dtype = dtype;
        run.d = d;
        const Instance inst = generate(gen_config(run));
        rows.push_back(detail::evaluate(run, inst.q, inst.k, inst.v));
      }
    }
  }
  return rows;
}

/// CSV table, one row per (kernel, dtype, d, N) cell.
inline int cmd_sweep(const SweepConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const auto rows = sweep(cfg);
    out << kReportCsvHeader << '\n';
    for (const auto& row : rows) out << detail::csv_line(row) << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "flashexp sweep: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace flashexp
