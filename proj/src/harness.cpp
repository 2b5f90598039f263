#include "fsvc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <thread>

#include "fsvc/error.hpp"

namespace fsvc {

ConfidenceInterval ci95(std::span<const double> values) {
  if (values.empty()) throw ValidationError("ci95 of an empty sample");
  const auto n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return {mean, 1.96 * sd / std::sqrt(n)};
}

namespace {

std::string eval_fingerprint(const TrainedModel& model, const EvalOptions& o, int iters) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s|%d|%d|%d|%llu|%s|%d|%016llx", model.config.fingerprint().c_str(), o.n_way,
                o.k_shot, o.episodes, static_cast<unsigned long long>(o.seed), std::string(to_string(o.split)).c_str(),
                iters, static_cast<unsigned long long>(model.weights_fingerprint()));
  const std::string text(buf);
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text.data(), text.size())));
  return buf;
}

}  // namespace

EvalResult evaluate(const TrainedModel& model, const Dataset& data, const EvalOptions& options) {
  model.validate();
  if (options.episodes < 1) throw ValidationError("episodes must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  MethodConfig cfg = model.config;
  cfg.n_way = options.n_way;
  cfg.k_shot = options.k_shot;
  if (options.iters_adapt) cfg.iters_adapt = *options.iters_adapt;
  cfg.validate();
  const SplitIndex split = SplitIndex::build(data, options.split);

  // Surface capacity errors on the calling thread before fanning out.
  {
    RngStream probe(options.seed, 0);
    (void)sample_episode(data, split, cfg.n_way, cfg.k_shot, probe);
  }

  EvalResult result;
  result.accuracies.assign(static_cast<std::size_t>(options.episodes), 0.0);
  const auto run = [&](std::size_t e) {
    RngStream rng(options.seed, e);
    const Episode ep = sample_episode(data, split, cfg.n_way, cfg.k_shot, rng);
    result.accuracies[e] = adapt_and_predict(model, ep, cfg, rng) == ep.query.label ? 1.0 : 0.0;
  };
  const int workers = std::min(options.threads, options.episodes);
  if (workers <= 1) {
    for (std::size_t e = 0; e < result.accuracies.size(); ++e) run(e);
  } else {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    {
      std::vector<std::jthread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (auto e = static_cast<std::size_t>(w); e < result.accuracies.size(); e += static_cast<std::size_t>(workers)) {
              run(e);
            }
          } catch (...) {
            errors[static_cast<std::size_t>(w)] = std::current_exception();
          }
        });
      }
    }
    for (const auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
  }

  const ConfidenceInterval ci = ci95(result.accuracies);
  EvalReport& r = result.report;
  r.method = std::string(to_string(cfg.method));
  r.n_way = cfg.n_way;
  r.k_shot = cfg.k_shot;
  r.episodes = options.episodes;
  r.mean_accuracy = ci.mean;
  r.ci95_halfwidth = ci.halfwidth;
  r.seed = options.seed;
  r.config_fingerprint = eval_fingerprint(model, options, cfg.iters_adapt);
  r.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

int threads_from_env() {
  const char* v = std::getenv("FSVC_THREADS");
  if (v == nullptr || *v == '\0') return 0;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 0) return 0;
  return static_cast<int>(std::min<long>(n, 256));
}

Manifest build_splits(const Manifest& full, SplitCounts counts, SplitCaps caps, std::uint64_t seed) {
  if (counts.train < 0 || counts.val < 0 || counts.test < 0) throw ValidationError("split counts must be >= 0");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < full.videos.size(); ++i) by_class[full.videos[i].class_id].push_back(i);
  std::vector<int> ids;
  for (const auto& [id, _] : by_class) ids.push_back(id);
  const std::size_t wanted = static_cast<std::size_t>(counts.train) + counts.val + counts.test;
  if (ids.size() < wanted) {
    throw CapacityError("manifest has " + std::to_string(ids.size()) + " classes with videos, splits need " +
                        std::to_string(wanted));
  }
  RngStream class_rng(seed, 0);
  const auto order = class_rng.sample_without_replacement(ids.size(), wanted);

  Manifest out;
  out.frame_count = full.frame_count;
  out.feature_dim = full.feature_dim;
  std::vector<std::pair<int, Split>> chosen;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Split s = k < static_cast<std::size_t>(counts.train) ? Split::train
                    : k < static_cast<std::size_t>(counts.train + counts.val) ? Split::val
                                                                             : Split::test;
    chosen.emplace_back(ids[order[k]], s);
  }
  std::sort(chosen.begin(), chosen.end());
  for (const auto& [id, split] : chosen) {
    out.classes.push_back({id, full.class_name(id).value_or("class_" + std::to_string(id))});
    const auto& members = by_class[id];
    const std::optional<int> cap = split == Split::train ? caps.train : split == Split::val ? caps.val : caps.test;
    std::vector<std::size_t> keep(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) keep[i] = i;
    if (cap && static_cast<std::size_t>(std::max(*cap, 0)) < members.size()) {
      RngStream video_rng(seed, 1 + static_cast<std::uint64_t>(id));
      keep = video_rng.sample_without_replacement(members.size(), static_cast<std::size_t>(std::max(*cap, 0)));
      std::sort(keep.begin(), keep.end());
    }
    for (std::size_t i : keep) {
      VideoEntry v = full.videos[members[i]];
      v.split = split;
      out.videos.push_back(std::move(v));
    }
  }
  out.validate();
  return out;
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  throw ValidationError("unknown report format '" + std::string(s) + "' (expected json or csv)");
}

std::string render_report(const EvalReport& r, ReportFormat format) {
  char buf[1024];
  const double pct = 100.0 * r.mean_accuracy;
  const double ci_pct = 100.0 * r.ci95_halfwidth;
  const auto seed = static_cast<unsigned long long>(r.seed);
  if (format == ReportFormat::json) {
    std::snprintf(buf, sizeof buf,
                  "{\n"
                  "  \"method\": \"%s\",\n"
                  "  \"n_way\": %d,\n"
                  "  \"k_shot\": %d,\n"
                  "  \"episodes\": %d,\n"
                  "  \"mean_accuracy\": %.10f,\n"
                  "  \"ci95_halfwidth\": %.10f,\n"
                  "  \"accuracy_pct\": \"%.4f\",\n"
                  "  \"ci95_pct\": \"%.4f\",\n"
                  "  \"seed\": %llu,\n"
                  "  \"config_fingerprint\": \"%s\"\n"
                  "}\n",
                  r.method.c_str(), r.n_way, r.k_shot, r.episodes, r.mean_accuracy, r.ci95_halfwidth, pct, ci_pct,
                  seed, r.config_fingerprint.c_str());
  } else {
    std::snprintf(buf, sizeof buf,
                  "method,n_way,k_shot,episodes,mean_accuracy,ci95_halfwidth,accuracy_pct,ci95_pct,seed,"
                  "config_fingerprint\n"
                  "%s,%d,%d,%d,%.10f,%.10f,%.4f,%.4f,%llu,%s\n",
                  r.method.c_str(), r.n_way, r.k_shot, r.episodes, r.mean_accuracy, r.ci95_halfwidth, pct, ci_pct,
                  seed, r.config_fingerprint.c_str());
  }
  return buf;
}

void write_report(const EvalReport& report, ReportFormat format, const std::filesystem::path& path) {
  const std::string text = render_report(report, format);
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (f == nullptr) throw IoError("cannot open '" + path.string() + "' for writing");
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
  if (std::fclose(f) != 0 || !ok) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace fsvc
