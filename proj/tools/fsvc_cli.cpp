// fsvc: command-line front end for generation, split construction, training,
// evaluation and the built-in selftest.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fsvc/checkpoint.hpp"
#include "fsvc/dataset.hpp"
#include "fsvc/error.hpp"
#include "fsvc/harness.hpp"
#include "fsvc/manifest.hpp"
#include "fsvc/protocols.hpp"
#include "fsvc/selftest.hpp"
#include "fsvc/synthdata.hpp"

namespace {

using namespace fsvc;

SplitCounts parse_counts(const std::string& text) {
  std::vector<int> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(std::stoi(item));
  if (parts.size() != 3) throw CLI::ValidationError("--classes", "expected train,val,test counts, e.g. 64,12,24");
  return {parts[0], parts[1], parts[2]};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot video classification over frame-feature sequences"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic benchmark");
  std::string gen_spec;
  std::string gen_out;
  gen->add_option("--spec", gen_spec, "Generator spec (JSON)")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", gen_out, "Output directory")->required();

  // splits
  auto* splits = app.add_subcommand("splits", "Build a disjoint train/val/test class partition");
  std::string splits_manifest;
  std::string splits_classes = "64,12,24";
  std::optional<int> splits_cap;
  std::uint64_t splits_seed = 0;
  std::string splits_out;
  splits->add_option("--manifest", splits_manifest, "Source manifest")->required()->check(CLI::ExistingFile);
  splits->add_option("--classes", splits_classes, "train,val,test class counts")->capture_default_str();
  splits->add_option("--cap", splits_cap, "Max training videos per class (omit for no cap)");
  splits->add_option("--seed", splits_seed, "Partition seed")->capture_default_str();
  splits->add_option("--out", splits_out, "Output manifest (default: splits_manifest.json next to the source)");

  // train
  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  std::string train_method;
  std::string train_manifest;
  std::string train_init = "scratch";
  std::string train_pretrain;
  std::string train_out;
  MethodConfig cfg;
  std::optional<double> lr_base;
  train->add_option("--method", train_method, "meta-baseline|cmn-lite|otam-lite|baseline|baseline-plus")->required();
  train->add_option("--manifest", train_manifest, "Benchmark manifest")->required()->check(CLI::ExistingFile);
  train->add_option("--init", train_init, "scratch|pretrained")->capture_default_str();
  train->add_option("--pretrain-manifest", train_pretrain, "Manifest of disjoint pretraining classes")
      ->check(CLI::ExistingFile);
  train->add_option("--seed", cfg.seed, "Training seed")->capture_default_str();
  train->add_option("--out", train_out, "Checkpoint path")->required();
  train->add_option("--way", cfg.n_way, "Episode classes")->capture_default_str();
  train->add_option("--shot", cfg.k_shot, "Supports per class")->capture_default_str();
  train->add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str();
  train->add_option("--episodes-per-epoch", cfg.episodes_per_epoch, "Meta-training episodes per epoch")
      ->capture_default_str();
  train->add_option("--val-episodes", cfg.val_episodes, "Validation episodes per epoch")->capture_default_str();
  train->add_option("--patience", cfg.patience, "Early-stop patience in epochs (0 = off)")->capture_default_str();
  train->add_option("--batch-size", cfg.batch_size, "Classification mini-batch size")->capture_default_str();
  train->add_option("--embed-dim", cfg.embed_dim, "Embedding dimension C")->capture_default_str();
  train->add_option("--saliency-heads", cfg.saliency_heads, "cmn-lite attention heads")->capture_default_str();
  train->add_option("--dropout", cfg.dropout_p, "Dropout before the base classifier (baseline-plus)")
      ->capture_default_str();
  train->add_option("--temperature", cfg.temperature, "Similarity scale for metric losses")->capture_default_str();
  train->add_option("--lr", lr_base, "Base learning rate (default depends on method and init)");
  train->add_option("--lr-adapt", cfg.lr_adapt, "Test-time head learning rate")->capture_default_str();
  train->add_option("--finetune-iters", cfg.iters_adapt, "Test-time head iterations")->capture_default_str();
  train->add_option("--pretrain-epochs", cfg.pretrain_epochs, "Pretraining epochs")->capture_default_str();
  train->add_flag("--dtw-normalize", cfg.dtw_normalize, "Divide DTW cost by path length");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on sampled episodes");
  std::string eval_ckpt;
  std::string eval_manifest;
  std::string eval_report;
  std::string eval_format = "json";
  std::string eval_split = "test";
  EvalOptions opts;
  std::optional<int> eval_iters;
  eval->add_option("--ckpt", eval_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--manifest", eval_manifest, "Benchmark manifest")->required()->check(CLI::ExistingFile);
  eval->add_option("--way", opts.n_way, "Episode classes")->capture_default_str();
  eval->add_option("--shot", opts.k_shot, "Supports per class")->capture_default_str();
  eval->add_option("--episodes", opts.episodes, "Number of episodes")->capture_default_str();
  eval->add_option("--seed", opts.seed, "Episode seed")->capture_default_str();
  eval->add_option("--report", eval_report, "Report path")->required();
  eval->add_option("--format", eval_format, "json|csv")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  eval->add_option("--split", eval_split, "train|val|test")->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  eval->add_option("--finetune-iters", eval_iters, "Override test-time head iterations");

  auto* selftest = app.add_subcommand("selftest", "Run built-in oracle and gradient checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const GeneratorSpec spec = load_generator_spec(gen_spec);
      const BenchmarkManifests out = gen_benchmark(spec, gen_out);
      std::cout << "wrote " << out.benchmark.videos.size() << " videos to " << gen_out << "/manifest.json";
      if (out.pretrain) std::cout << " and " << out.pretrain->videos.size() << " to pretrain_manifest.json";
      std::cout << '\n';
    } else if (splits->parsed()) {
      const Manifest full = load_manifest(splits_manifest);
      SplitCaps caps;
      caps.train = splits_cap;
      const Manifest out = build_splits(full, parse_counts(splits_classes), caps, splits_seed);
      const std::filesystem::path dest = splits_out.empty()
                                             ? std::filesystem::path(splits_manifest).parent_path() / "splits_manifest.json"
                                             : std::filesystem::path(splits_out);
      save_manifest(out, dest);
      std::cout << "wrote " << out.videos.size() << " videos to " << dest.string() << '\n';
    } else if (train->parsed()) {
      cfg.method = parse_method(train_method);
      cfg.init = parse_init(train_init);
      cfg.lr_base = lr_base;
      if (cfg.init == InitMode::pretrained && train_pretrain.empty()) {
        std::cerr << "error: --init pretrained requires --pretrain-manifest\n";
        return 2;
      }
      const Dataset data = load_dataset(load_manifest(train_manifest));
      std::optional<Dataset> pretrain;
      if (!train_pretrain.empty()) pretrain = load_dataset(load_manifest(train_pretrain));
      const TrainedModel model = train_model(data, cfg, pretrain ? &*pretrain : nullptr);
      save_checkpoint(model, train_out);
      std::cout << "trained " << to_string(cfg.method) << " (" << model.epoch_losses.size()
                << " epochs, validation accuracy " << model.val_accuracy << ") -> " << train_out << '\n';
    } else if (eval->parsed()) {
      const TrainedModel model = load_checkpoint(eval_ckpt);
      const Dataset data = load_dataset(load_manifest(eval_manifest));
      opts.split = parse_split(eval_split);
      opts.iters_adapt = eval_iters;
      opts.threads = threads_from_env();
      const EvalResult result = evaluate(model, data, opts);
      write_report(result.report, parse_report_format(eval_format), eval_report);
      std::fprintf(stderr, "%s %d-way %d-shot: %.4f +- %.4f %% over %d episodes (%.2f s)\n",
                   result.report.method.c_str(), result.report.n_way, result.report.k_shot,
                   100.0 * result.report.mean_accuracy, 100.0 * result.report.ci95_halfwidth, result.report.episodes,
                   result.report.wall_time_seconds);
    } else if (selftest->parsed()) {
      return report_selftest(run_selftest(), std::cout);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
