#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "entail/entail.hpp"

namespace {

using namespace entail;

struct Options {
  std::optional<std::string> config;
  std::optional<std::string> manifest;
  std::optional<std::string> checkpoint;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::size_t k = 10;
  std::size_t reps = 3;
  std::string model = "conentail";
  std::string name;
  bool synthetic = false;
  bool untrained = false;
  std::vector<std::size_t> ks{0, 10, 20, 40, 80};
  std::string dataset;
  std::size_t n = 5;
  std::string with;
  std::string without;
  std::vector<std::string> inputs;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "JSON training config");
  cmd->add_option("--manifest", o.manifest, "dataset manifest (default <out>/data/manifest.json)");
  cmd->add_option("--seed", o.seed, "overrides the config seed");
  cmd->add_option("--out", o.out, "output root (default $ENTAIL_OUT, then ./runs)");
}

void add_checkpoint(CLI::App* cmd, Options& o) {
  cmd->add_option("--checkpoint", o.checkpoint, "checkpoint file (default <out>/<model>.ckpt)");
  cmd->add_option("--model", o.model, "conentail or efl")
      ->check(CLI::IsMember({"conentail", "efl"}));
  cmd->add_option("--name", o.name, "row name in the results table");
}

TrainConfig config_of(const Options& o) {
  TrainConfig cfg = o.config ? load_config(*o.config) : TrainConfig{};
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  return cfg;
}

fs::path root_of(const Options& o) { return pipeline::output_root(o.out); }

fs::path manifest_of(const Options& o) {
  return o.manifest ? fs::path(*o.manifest) : root_of(o) / "data" / "manifest.json";
}

std::string_view model_of(const Options& o) {
  return o.model == "efl" ? kModelEfl : kModelContrastive;
}

fs::path checkpoint_of(const Options& o) {
  return o.checkpoint ? fs::path(*o.checkpoint) : pipeline::default_checkpoint(root_of(o), model_of(o));
}

// "ConEntail w/o pretraining" -> "conentail_w_o_pretraining"
std::string slug(std::string_view s) {
  std::string out;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      out += static_cast<char>(std::tolower(u));
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

std::string row_name(const Options& o) {
  return o.name.empty() ? std::string(model_of(o)) : o.name;
}

void rename_rows(EvalReport& rep, const std::string& name) {
  if (name.empty()) return;
  rep.model = name;
  for (auto& d : rep.datasets) d.model = name;
}

void emit(const std::vector<EvalReport>& reps, const fs::path& root, const std::string& stem) {
  emit_report(reps, root, stem);
  std::cout << render_table(reps);
  std::cerr << "wrote " << (root / (stem + ".json")).string() << " and " << stem << ".md\n";
}

int run_prepare(const Options& o) {
  const auto cfg = config_of(o);
  const auto root = root_of(o);
  fs::path manifest = manifest_of(o);
  if (o.synthetic) {
    if (o.manifest) throw Error("--synthetic writes its own manifest; drop --manifest");
    manifest = synthetic::write_suite(root / "data", cfg.seed);
    std::cerr << "wrote synthetic suite to " << manifest.parent_path().string() << "\n";
  }
  const auto meta = pipeline::prepare(manifest, cfg, root);
  for (const auto& w : meta.report.warnings) std::cerr << "warning: " << w << "\n";
  std::cerr << "meta-dataset: " << meta.examples.size() << " examples -> "
            << pipeline::meta_path(root).string() << "\n";
  return 0;
}

int run_pretrain(const Options& o) {
  auto cfg = config_of(o);
  if (o.untrained) cfg.epochs_pretrain = 0;
  const auto ckpt = checkpoint_of(o);
  const auto r = pipeline::pretrain_model(manifest_of(o), pipeline::meta_path(root_of(o)), cfg,
                                          model_of(o), ckpt);
  for (std::size_t e = 0; e < r.epoch_mean_loss.size(); ++e) {
    std::cerr << "epoch " << e << " mean loss " << r.epoch_mean_loss[e] << "\n";
  }
  std::cerr << "checkpoint " << ckpt.string() << " (" << r.checkpoint.fingerprint() << ")\n";
  return 0;
}

int run_eval_zero(const Options& o) {
  const auto cfg = config_of(o);
  auto rep = pipeline::eval_zero(load_checkpoint(checkpoint_of(o)), manifest_of(o), cfg);
  rename_rows(rep, o.name);
  emit({rep, pipeline::eval_random(manifest_of(o), cfg.seed, 0)}, root_of(o), "zero_shot_" + slug(row_name(o)));
  return 0;
}

int run_eval_few(const Options& o) {
  const auto cfg = config_of(o);
  auto rep = pipeline::eval_few(load_checkpoint(checkpoint_of(o)), manifest_of(o), cfg,
                                {o.k, o.reps, cfg.seed, {}});
  rename_rows(rep, o.name);
  emit({rep, pipeline::eval_random(manifest_of(o), cfg.seed, o.k)}, root_of(o),
       "few_shot_k" + std::to_string(o.k) + "_" + slug(row_name(o)));
  return 0;
}

int run_sweep(const Options& o) {
  const auto cfg = config_of(o);
  auto reps = pipeline::sweep(load_checkpoint(checkpoint_of(o)), manifest_of(o), cfg, o.ks,
                              o.reps, cfg.seed);
  for (auto& r : reps) rename_rows(r, o.name);
  emit(reps, root_of(o), "sweep_" + slug(row_name(o)));
  return 0;
}

// A number, or a results file whose first report's average is used.
std::vector<EvalReport> reports_or_value(const std::string& arg, double& value) {
  const char* end = arg.data() + arg.size();
  auto [ptr, ec] = std::from_chars(arg.data(), end, value);
  if (ec == std::errc() && ptr == end) return {};
  auto reps = load_reports(arg);
  if (reps.empty()) throw Error(arg + " holds no reports");
  value = reps.front().average();
  return reps;
}

int run_rpg(const Options& o) {
  double with = 0.0;
  double without = 0.0;
  const auto rw = reports_or_value(o.with, with);
  const auto rwo = reports_or_value(o.without, without);
  if (!rw.empty() && !rwo.empty()) {
    for (const auto& d : rw.front().datasets) {
      const double base = rwo.front().find(d.dataset_id).mean;
      std::cout << d.dataset_id << " " << relative_performance_gain(d.mean, base) << "\n";
    }
  }
  std::cout << "rpg " << relative_performance_gain(with, without) << "\n";
  return 0;
}

int run_case_study(const Options& o) {
  if (o.dataset.empty()) throw Error("case-study needs --dataset");
  const auto cfg = config_of(o);
  const auto table = pipeline::case_study(load_checkpoint(checkpoint_of(o)), manifest_of(o), cfg,
                                          o.dataset, o.n);
  pipeline::write_text_file(root_of(o) / ("case_study_" + slug(o.dataset) + ".md"), table);
  std::cout << table;
  return 0;
}

int run_report(const Options& o) {
  std::vector<EvalReport> all;
  for (const auto& f : o.inputs) {
    for (auto& r : load_reports(f)) {
      // the same reference row is emitted next to every evaluation
      const bool dup = std::any_of(all.begin(), all.end(), [&](const EvalReport& a) {
        return a.model == r.model && a.k == r.k;
      });
      if (!dup) all.push_back(std::move(r));
    }
  }
  emit(all, root_of(o), "report");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entailment-based zero/few-shot text classification"};
  app.require_subcommand(1);
  Options o;

  auto* prepare = app.add_subcommand("prepare", "build the meta-dataset from the pretrain partition");
  add_common(prepare, o);
  prepare->add_flag("--synthetic", o.synthetic, "generate the bundled synthetic suite first");

  auto* pretrain = app.add_subcommand("pretrain", "train a model on the meta-dataset");
  add_common(pretrain, o);
  add_checkpoint(pretrain, o);
  pretrain->add_flag("--untrained", o.untrained, "write the initial weights only (control)");

  auto* zero = app.add_subcommand("eval-zero", "zero-shot evaluation on the test partition");
  add_common(zero, o);
  add_checkpoint(zero, o);

  auto* few = app.add_subcommand("eval-few", "few-shot fine-tuning and evaluation");
  add_common(few, o);
  add_checkpoint(few, o);
  few->add_option("--k", o.k, "support examples per label")->check(CLI::PositiveNumber);
  few->add_option("--reps", o.reps, "support-set repetitions")->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "evaluate over a grid of shot counts");
  add_common(sweep, o);
  add_checkpoint(sweep, o);
  sweep->add_option("--k", o.ks, "shot counts")->delimiter(',');
  sweep->add_option("--reps", o.reps, "support-set repetitions")->check(CLI::PositiveNumber);

  auto* rpg = app.add_subcommand("rpg", "relative performance gain (with - without) / without");
  rpg->add_option("--with", o.with, "accuracy or results file with pretraining")->required();
  rpg->add_option("--without", o.without, "accuracy or results file without")->required();

  auto* cs = app.add_subcommand("case-study", "ranked zero-shot labels for a few test inputs");
  add_common(cs, o);
  add_checkpoint(cs, o);
  cs->add_option("--dataset", o.dataset, "test dataset id")->required();
  cs->add_option("--n", o.n, "number of inputs");

  auto* report = app.add_subcommand("report", "merge results files into one table");
  report->add_option("inputs", o.inputs, "results .json files")->required();
  report->add_option("--out", o.out, "output root");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*prepare) return run_prepare(o);
    if (*pretrain) return run_pretrain(o);
    if (*zero) return run_eval_zero(o);
    if (*few) return run_eval_few(o);
    if (*sweep) return run_sweep(o);
    if (*rpg) return run_rpg(o);
    if (*cs) return run_case_study(o);
    if (*report) return run_report(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
