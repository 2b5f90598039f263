// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset, e.g. `acceptance 1 2 8`.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "fsvc/align.hpp"
#include "fsvc/harness.hpp"
#include "fsvc/protocols.hpp"
#include "fsvc/synthdata.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#ifndef FSVC_CLI
#error "FSVC_CLI must name the fsvc executable"
#endif

using namespace fsvc;
using fsvc::testing::random_matrix;
using fsvc::testing::random_vector;
using fsvc::testing::read_bytes;
using fsvc::testing::TempDir;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Standard benchmark for the baseline comparisons: lightly warped, full rank.
GeneratorSpec standard_spec(std::uint64_t seed) {
  GeneratorSpec s;
  s.noise_sigma = 0.3;
  s.warp_strength = 0.05;
  s.videos_per_class = 10;
  s.seed = seed;
  return s;
}

// Classes share a rank-8 input subspace, so base classes carry structure
// that transfers to novel ones. 60 videos per class leave room for the cap.
GeneratorSpec transfer_spec(std::uint64_t seed) {
  GeneratorSpec s;
  s.noise_sigma = 0.5;
  s.warp_strength = 0.05;
  s.videos_per_class = 60;
  s.signal_rank = 8;
  s.seed = seed;
  return s;
}

double train_and_eval(const Dataset& data, Method m, std::uint64_t seed, int shot, int episodes) {
  MethodConfig cfg;
  cfg.method = m;
  cfg.seed = seed;
  cfg.k_shot = shot;
  const TrainedModel model = train_model(data, cfg);
  EvalOptions o;
  o.k_shot = shot;
  o.episodes = episodes;
  o.seed = 1000 + seed;
  return evaluate(model, data, o).report.mean_accuracy;
}

Outcome dtw_oracle() {
  const auto t0 = Clock::now();
  RngStream r(101, 0);
  int bad = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int rows = 2 + static_cast<int>(r.uniform_index(3));
    const int cols = 2 + static_cast<int>(r.uniform_index(3));
    Matrix d(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) d(i, j) = r.uniform(0.0, 2.0);
    const DtwResult res = dtw(d);
    const double err = std::abs(res.cost - oracle::dtw_enumerate(d));
    worst = std::max(worst, err);
    if (err >= 1e-9 || !res.path.admissible(rows, cols) || std::abs(res.path.cost(d) - res.cost) >= 1e-9) ++bad;
  }
  const double dt = seconds_since(t0);
  return {bad == 0 && dt < 5.0, fmt("1000 matrices, %d mismatches, max |dp - enum| %.2e, %.3f s", bad, worst, dt)};
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  RngStream r(102, 0);
  double worst[4] = {0, 0, 0, 0};
  auto track = [&](int which, double err) { worst[which] = std::max(worst[which], err); };

  for (int point = 0; point < 100; ++point) {
    const int c_in = 6, c = 5, k = 4, n = 8;
    EmbeddingParams e{random_matrix(r, c, c_in), random_vector(r, c)};
    LinearHead h{random_matrix(r, k, c), random_vector(r, k)};
    Matrix pooled = random_matrix(r, n, c_in);
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(r.uniform_index(k));
    Matrix masks = Matrix::NullaryExpr(n, c, [&] { return r.uniform() < 0.5 ? 0.0 : 2.0; });
    const ClassificationGrad g = classification_loss_grad(e, h, pooled, y, masks);
    auto loss = [&] { return oracle::classification_loss(e, h, pooled, y, masks); };
    track(0, oracle::rel_err(g.embedding.dW, oracle::fd_grad(e.W, loss)));
    track(0, oracle::rel_err(g.embedding.db, oracle::fd_grad(e.b, loss)));
    track(0, oracle::rel_err(g.dW_head, oracle::fd_grad(h.W, loss)));
    track(0, oracle::rel_err(g.db_head, oracle::fd_grad(h.b, loss)));
  }

  Dataset d = oracle::random_dataset(r, 8, 4, 5, 6);
  const SplitIndex idx = SplitIndex::build(d, Split::train);
  for (int point = 0; point < 100; ++point) {
    const Episode ep = sample_episode(d, idx, 4, 1 + point % 2, r);
    EmbeddingParams e{random_matrix(r, 5, 6), random_vector(r, 5)};
    const double tau = r.uniform(1.0, 10.0);
    {
      const EpisodeGrad g = episode_loss_grad(Method::meta_baseline, e, nullptr, ep, tau, false);
      auto loss = [&] { return oracle::meta_loss(e, ep, tau); };
      track(1, oracle::rel_err(g.embedding.dW, oracle::fd_grad(e.W, loss)));
      track(1, oracle::rel_err(g.embedding.db, oracle::fd_grad(e.b, loss)));
    }
    {
      SaliencyParams sal{random_matrix(r, 3, 5)};
      const EpisodeGrad g = episode_loss_grad(Method::cmn_lite, e, &sal, ep, tau, false);
      auto loss = [&] { return oracle::cmn_loss(e, sal.queries, ep, tau); };
      track(2, oracle::rel_err(g.embedding.dW, oracle::fd_grad(e.W, loss)));
      track(2, oracle::rel_err(g.embedding.db, oracle::fd_grad(e.b, loss)));
      track(2, oracle::rel_err(g.d_saliency, oracle::fd_grad(sal.queries, loss)));
    }
    {
      const bool normalize = point % 2 == 1;
      const EpisodeGrad g = episode_loss_grad(Method::otam_lite, e, nullptr, ep, tau, normalize);
      auto loss = [&] { return oracle::otam_loss(e, ep, tau, g.paths, normalize); };
      track(3, oracle::rel_err(g.embedding.dW, oracle::fd_grad(e.W, loss)));
      track(3, oracle::rel_err(g.embedding.db, oracle::fd_grad(e.b, loss)));
    }
  }
  const double dt = seconds_since(t0);
  const bool ok = std::all_of(std::begin(worst), std::end(worst), [](double w) { return w < 1e-4; }) && dt < 60.0;
  return {ok, fmt("max rel err classification %.1e, meta-baseline %.1e, cmn-lite %.1e, otam-lite %.1e; %.1f s",
                  worst[0], worst[1], worst[2], worst[3], dt)};
}

Outcome imprint_equivalence() {
  RngStream r(103, 0);
  Dataset d = oracle::random_dataset(r, 20, 3, 6, 10, Split::test);
  const SplitIndex idx = SplitIndex::build(d, Split::test);
  MethodConfig cfg;
  cfg.method = Method::baseline_plus;
  cfg.iters_adapt = 0;
  TrainedModel model{cfg, EmbeddingParams::random(cfg.embed_dim, 10, r), LinearHead::random(40, cfg.embed_dim, r),
                     std::nullopt, 0.0, {}};
  int disagree = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Episode ep = sample_episode(d, idx, 5, 1, r);
    auto logits = [&](const Matrix& x) {
      const Vector pooled = x.colwise().mean().transpose();
      const Vector f = model.embedding.W * pooled + model.embedding.b;
      return Vector(model.base_head->W * f + model.base_head->b);
    };
    std::vector<Vector> templates(5);
    for (const auto& s : ep.support) templates[static_cast<std::size_t>(s.label)] = logits(s.seq->frames);
    const Vector q = logits(ep.query.seq->frames);
    int best = 0;
    for (int k = 1; k < 5; ++k)
      if (oracle::cos_sim(templates[k], q) > oracle::cos_sim(templates[best], q)) best = k;
    RngStream er(7, static_cast<std::uint64_t>(trial));
    if (adapt_and_predict(model, ep, cfg, er) != best) ++disagree;
  }
  return {disagree == 0, fmt("1000 episodes, %d disagreements", disagree)};
}

Outcome noiseless() {
  GeneratorSpec s;
  s.noise_sigma = 0.0;
  s.warp_strength = 0.0;
  s.seed = 104;
  const Dataset data = generate_benchmark(s).benchmark;
  std::string detail;
  bool ok = true;
  for (Method m : {Method::meta_baseline, Method::cmn_lite, Method::otam_lite, Method::baseline, Method::baseline_plus}) {
    const double acc = train_and_eval(data, m, 4, 1, 2000);
    ok = ok && acc == 1.0;
    detail += fmt("%s %.4f ", std::string(to_string(m)).c_str(), acc);
  }
  return {ok, detail + "(2000 episodes each)"};
}

Outcome alignment_under_warp() {
  double otam = 0.0, meta = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    GeneratorSpec s;
    s.noise_sigma = 0.5;
    s.warp_strength = 0.6;
    s.seed = 200 + seed;
    const Dataset data = generate_benchmark(s).benchmark;
    otam += train_and_eval(data, Method::otam_lite, seed, 1, 2000) / 5.0;
    meta += train_and_eval(data, Method::meta_baseline, seed, 1, 2000) / 5.0;
  }
  const double gap = 100.0 * (otam - meta);
  return {gap >= 3.0, fmt("warp 0.6 noise 0.5: otam-lite %.2f%%, meta-baseline %.2f%%, gap %+.2f points",
                          100.0 * otam, 100.0 * meta, gap)};
}

Outcome baseline_plus_vs_baseline() {
  double plus = 0.0, base = 0.0;
  int wins = 0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Dataset data = generate_benchmark(standard_spec(300 + seed)).benchmark;
    const double bp = train_and_eval(data, Method::baseline_plus, seed, 1, 2000);
    const double b = train_and_eval(data, Method::baseline, seed, 1, 2000);
    plus += bp / 5.0;
    base += b / 5.0;
    if (bp >= b) ++wins;
    per_seed += fmt(" %+.1f", 100.0 * (bp - b));
  }
  return {plus >= base && wins >= 4, fmt("baseline-plus %.2f%%, baseline %.2f%%, wins %d/5, per-seed%s", 100.0 * plus,
                                         100.0 * base, wins, per_seed.c_str())};
}

Outcome more_base_data() {
  double full = 0.0, capped = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const GeneratorSpec s = transfer_spec(400 + seed);
    const Dataset all = generate_benchmark(s).benchmark;
    auto restrict_to = [&](std::optional<int> cap) {
      const Manifest m = build_splits(all.manifest, {s.train_classes, s.val_classes, s.test_classes}, {cap, {}, {}}, seed);
      return select_videos(all, m);
    };
    const double a = train_and_eval(restrict_to(std::nullopt), Method::baseline_plus, seed, 5, 2000);
    const double b = train_and_eval(restrict_to(10), Method::baseline_plus, seed, 5, 2000);
    full += a / 5.0;
    capped += b / 5.0;
    per_seed += fmt(" %+.1f", 100.0 * (a - b));
  }
  const double gap = 100.0 * (full - capped);
  return {gap >= 3.0, fmt("5-shot baseline-plus: cap inf %.2f%%, cap 10 %.2f%%, gap %+.2f points, per-seed%s",
                          100.0 * full, 100.0 * capped, gap, per_seed.c_str())};
}

Outcome statistics() {
  RngStream r(108, 0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(2 + r.uniform_index(20000));
    const double p = r.uniform();
    for (auto& x : v) x = r.uniform() < p ? 1.0 : 0.0;
    worst = std::max(worst, std::abs(ci95(v).halfwidth - oracle::ci95_halfwidth(v)));
  }
  std::vector<double> alt(10000);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = static_cast<double>(i % 2);
  const ConfidenceInterval c = ci95(alt);
  const double closed = 1.96 * 0.5 * std::sqrt(10000.0 / 9999.0) / 100.0;
  const bool ok = worst < 1e-12 && c.mean == 0.5 && std::abs(c.halfwidth - closed) < 1e-15;
  return {ok, fmt("max |ci - reference| %.1e over 100 vectors; alternating: mean %.4f ci %.10f (closed form %.10f)",
                  worst, c.mean, c.halfwidth, closed)};
}

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " \"" FSVC_CLI "\" " + args + " >/dev/null 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

Outcome cli_determinism_and_speed() {
  TempDir dir("acceptance");
  auto q = [](const std::filesystem::path& p) { return "\"" + p.string() + "\""; };
  GeneratorSpec s = standard_spec(109);
  s.feature_dim = 32;
  s.frame_count = 8;
  save_generator_spec(s, dir / "spec.json");
  const auto data = dir / "data";
  if (run_cli("gen --spec " + q(dir / "spec.json") + " --out " + q(data)) != 0) return {false, "gen failed"};
  const auto ckpt = dir / "bp.fsvm";
  if (run_cli("train --method baseline-plus --manifest " + q(data / "manifest.json") +
              " --embed-dim 16 --seed 9 --out " + q(ckpt)) != 0)
    return {false, "train failed"};
  const std::string eval = "eval --ckpt " + q(ckpt) + " --manifest " + q(data / "manifest.json") +
                           " --way 5 --shot 1 --episodes 10000 --seed 9 --report ";
  const auto t0 = Clock::now();
  if (run_cli(eval + q(dir / "serial.json"), "env -u FSVC_THREADS") != 0) return {false, "eval failed"};
  const double dt = seconds_since(t0);
  if (run_cli(eval + q(dir / "again.json"), "env -u FSVC_THREADS") != 0) return {false, "eval failed"};
  bool same = read_bytes(dir / "serial.json") == read_bytes(dir / "again.json");
  for (const char* threads : {"0", "1", "2", "4", "8"}) {
    const auto out = dir / (std::string("t") + threads + ".json");
    if (run_cli(eval + q(out), std::string("FSVC_THREADS=") + threads) != 0) return {false, "eval failed"};
    same = same && read_bytes(dir / "serial.json") == read_bytes(out);
  }
  return {dt < 60.0 && same, fmt("serial 10000-episode eval %.1f s; reports %s across 2 runs and FSVC_THREADS 0,1,2,4,8",
                                 dt, same ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"DTW oracle equivalence", dtw_oracle},
      {"gradient suite", gradient_suite},
      {"imprinting argmax equivalence", imprint_equivalence},
      {"noiseless sanity", noiseless},
      {"alignment pays under warping", alignment_under_warp},
      {"baseline-plus >= baseline", baseline_plus_vs_baseline},
      {"more base data helps", more_base_data},
      {"confidence intervals", statistics},
      {"eval determinism and speed", cli_determinism_and_speed},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.count(n)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("criterion %d %s: %s (%s) [%.1f s]\n", n, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
