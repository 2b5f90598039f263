#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fsvc/dataset.hpp"
#include "fsvc/episode.hpp"
#include "fsvc/protocols.hpp"

namespace fsvc {

struct ConfidenceInterval {
  double mean;
  double halfwidth;  // 1.96 * sample std (n - 1) / sqrt(n); 0 when n < 2
};

/// 95% normal-approximation interval of per-episode accuracies.
ConfidenceInterval ci95(std::span<const double> values);

struct EvalReport {
  std::string method;
  int n_way = 0;
  int k_shot = 0;
  int episodes = 0;
  double mean_accuracy = 0.0;
  double ci95_halfwidth = 0.0;
  std::uint64_t seed = 0;
  std::string config_fingerprint;
  double wall_time_seconds = 0.0;  // informational; never written to report files
};

struct EvalOptions {
  int n_way = 5;
  int k_shot = 1;
  int episodes = 10000;
  std::uint64_t seed = 0;
  Split split = Split::test;
  /// Worker threads; 0 or 1 evaluates serially.
  int threads = 0;
  /// Overrides model.config.iters_adapt when set.
  std::optional<int> iters_adapt;
};

struct EvalResult {
  EvalReport report;
  std::vector<double> accuracies;  // 0/1 per episode, in episode order
};

/// Episode e is sampled and adapted with RngStream(options.seed, e), so the
/// accuracy vector does not depend on the thread count.
EvalResult evaluate(const TrainedModel& model, const Dataset& data, const EvalOptions& options);

/// Worker count from FSVC_THREADS (unset, empty or invalid means 0 = serial).
int threads_from_env();

struct SplitCounts {
  int train = 64;
  int val = 12;
  int test = 24;
};

struct SplitCaps {
  std::optional<int> train;
  std::optional<int> val;
  std::optional<int> test;
};

/// Deterministic disjoint class partition of every class in `full` (its
/// existing split tags are ignored), optionally capping videos per class.
/// Classes beyond the requested counts are dropped. Throws CapacityError when
/// `full` has too few classes.
Manifest build_splits(const Manifest& full, SplitCounts counts, SplitCaps caps, std::uint64_t seed);

enum class ReportFormat { json, csv };
ReportFormat parse_report_format(std::string_view s);

/// Fixed key order, reals printed with fixed precision; identical reports
/// render to identical bytes.
std::string render_report(const EvalReport& report, ReportFormat format);
void write_report(const EvalReport& report, ReportFormat format, const std::filesystem::path& path);

}  // namespace fsvc
