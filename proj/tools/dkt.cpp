// dkt: dataset generation, training, evaluation, ablation, gradient checks
// and attention export.
//
// Exit codes: 0 success, 1 usage/config/format error, 2 verification failure,
// 3 numeric failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dkt/dkt.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitVerification = 2;
constexpr int kExitNumeric = 3;

struct CommonArgs {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config_file, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", a.sets, "override one key, key=value (repeatable)");
  cmd->add_option("--seed", a.seed, "override the seed key");
}

dkt::RunConfig build_config(const CommonArgs& a, dkt::RunConfig base = {}) {
  if (!a.config_file.empty()) base.merge_text(dkt::detail::read_file(a.config_file));
  for (const auto& s : a.sets) base.set_assignment(s);
  if (a.seed) base.set("seed", std::to_string(*a.seed));
  base.validate();
  return base;
}

/// Output directory that only appears once complete: everything is written to
/// "<out>.partial" and renamed on commit. An uncommitted stage is removed.
class StagedDir {
 public:
  explicit StagedDir(fs::path out) : out_(std::move(out)), stage_(out_.string() + ".partial") {
    fs::remove_all(stage_);
    fs::create_directories(stage_);
  }
  ~StagedDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(stage_, ec);
    }
  }
  const fs::path& path() const { return stage_; }
  void write(const std::string& name, const std::string& contents) const {
    dkt::detail::write_file(stage_ / name, contents);
  }
  void commit() {
    fs::remove_all(out_);
    if (out_.has_parent_path()) fs::create_directories(out_.parent_path());
    fs::rename(stage_, out_);
    committed_ = true;
  }

 private:
  fs::path out_, stage_;
  bool committed_ = false;
};

void log_epoch(const dkt::MetricsRecord& r) {
  std::fprintf(stderr, "epoch %zu  loss %.4f  src %.4f  tgt %.4f\n", r.epoch, r.loss_total, r.test_source.top1,
               r.test_target.top1);
}

dkt::RunConfig checkpoint_config(const dkt::Checkpoint& ck) {
  auto cfg = dkt::RunConfig::from_text(ck.config_text);
  cfg.validate();
  return cfg;
}

template <class T>
dkt::ModelParams<T> load_model(const dkt::Checkpoint& ck, const dkt::RunConfig& cfg) {
  auto p = dkt::ModelParams<T>::init(cfg.model_config(), cfg.init_seed());
  dkt::load_parameters(p, ck);
  return p;
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const CommonArgs& a, const std::string& out) {
  auto cfg = build_config(a);
  auto ds = dkt::dataset_for(cfg);
  StagedDir dir(out);
  dkt::write_dataset(dir.path(), ds);
  dir.write("config.txt", cfg.to_text());
  dir.commit();
  std::printf("wrote %zu train pairs, %zu + %zu test clips to %s\n", ds.train.size(), ds.test_source.size(),
              ds.test_target.size(), out.c_str());
  return 0;
}

template <class T>
int train_impl(const dkt::RunConfig& cfg, const dkt::Dataset& ds, const std::string& out) {
  StagedDir dir(out);
  auto r = dkt::run_training<T>(cfg, ds, log_epoch);
  dkt::write_checkpoint(dir.path() / "checkpoint.dktf", dkt::make_checkpoint(r.params, cfg.to_text()));
  dir.write("metrics.csv", dkt::metrics_csv(r.history));
  dir.write("confusion_target.csv", dkt::confusion_csv(r.history.back().test_target));
  dir.write("config.txt", cfg.to_text());
  dir.commit();
  const auto& last = r.history.back();
  std::printf("top1_source %.4f\ntop1_target %.4f\n", last.test_source.top1, last.test_target.top1);
  return 0;
}

int cmd_train(const CommonArgs& a, const std::string& data, const std::string& out) {
  auto cfg = build_config(a);
  const auto ds = data.empty() ? dkt::dataset_for(cfg) : dkt::read_dataset(data);
  if (ds.num_classes != cfg.model_config().num_classes)
    throw dkt::ConfigError("num_classes", "dataset has " + std::to_string(ds.num_classes) + " classes");
  return cfg.precision() == 32 ? train_impl<float>(cfg, ds, out) : train_impl<double>(cfg, ds, out);
}

template <class T>
int eval_impl(const dkt::Checkpoint& ck, const dkt::RunConfig& cfg, const std::vector<dkt::VideoClip>& clips,
              const std::string& split, const std::string& out) {
  const auto p = load_model<T>(ck, cfg);
  const auto r = dkt::evaluate(p, clips);
  StagedDir dir(out);
  dir.write("confusion_" + split + ".csv", dkt::confusion_csv(r));
  dir.write("config.txt", cfg.to_text());
  dir.commit();
  std::printf("top1 %.17g\n", r.top1);
  if (r.has_top5) std::printf("top5 %.17g\n", r.top5);
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& split, std::string out) {
  const auto ck = dkt::read_checkpoint(checkpoint);
  const auto cfg = checkpoint_config(ck);
  const auto ds = dkt::read_dataset(data);
  const auto& clips = split == "source" ? ds.test_source : ds.test_target;
  if (out.empty()) out = "eval_" + split;
  return cfg.precision() == 32 ? eval_impl<float>(ck, cfg, clips, split, out)
                               : eval_impl<double>(ck, cfg, clips, split, out);
}

int cmd_ablate(const CommonArgs& a, const std::string& grid_file, const std::string& out) {
  auto cfg = build_config(a);
  const auto grid_text = dkt::detail::read_file(grid_file);
  const auto grid = dkt::AblationGrid::parse(grid_text);
  StagedDir dir(out);
  const auto rows = dkt::ablate(cfg, grid, [](std::size_t i, std::size_t n, const dkt::AblationRow& r) {
    std::string cell;
    for (const auto& [k, v] : r.cell) cell += " " + k + "=" + v;
    std::fprintf(stderr, "[%zu/%zu]%s  src %.4f  tgt %.4f\n", i + 1, n, cell.c_str(), r.final.test_source.top1,
                 r.final.test_target.top1);
  });
  dir.write("ablation.csv", dkt::ablation_csv(grid, rows));
  dir.write("grid.txt", grid_text);
  dir.write("config.txt", cfg.to_text());
  dir.commit();
  std::fputs(dkt::ablation_csv(grid, rows).c_str(), stdout);
  return 0;
}

int cmd_gradcheck(const CommonArgs& a, const std::string& fault) {
  auto cfg = build_config(a, dkt::tiny_gradcheck_config());
  dkt::fault::corrupted_backward = fault;
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = dkt::run_gradcheck_suite(cfg, cfg.get_uint("seed"));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%s %-20s max_rel_err %.3e over %zu\n", r.passed ? "ok  " : "FAIL", r.name.c_str(), r.max_rel_error,
                r.checked);
    if (!r.passed) std::printf("     worst at %s\n", r.worst.c_str());
    ok = ok && r.passed;
  }
  std::printf("%zu checks in %.2f s: %s\n", results.size(), secs, ok ? "all passed" : "FAILED");
  return ok ? 0 : kExitVerification;
}

template <class T>
int export_impl(const dkt::Checkpoint& ck, const dkt::RunConfig& cfg, const dkt::VideoClip& src,
                const dkt::VideoClip& tgt, const std::string& out) {
  const auto p = load_model<T>(ck, cfg);
  const auto files = dkt::export_attention(p, src, tgt);
  StagedDir dir(out);
  for (const auto& f : files) dir.write(f.name, f.contents);
  dir.write("config.txt", cfg.to_text());
  dir.commit();
  std::printf("wrote %zu files to %s\n", files.size() + 1, out.c_str());
  return 0;
}

int cmd_export(const std::string& checkpoint, const std::vector<std::string>& clips, const std::string& out) {
  const auto ck = dkt::read_checkpoint(checkpoint);
  const auto cfg = checkpoint_config(ck);
  const auto src = dkt::read_clip(clips.at(0)).clip;
  const auto tgt = dkt::read_clip(clips.at(1)).clip;
  return cfg.precision() == 32 ? export_impl<float>(ck, cfg, src, tgt, out)
                               : export_impl<double>(ck, cfg, src, tgt, out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Triple-branch video transformer for low-light action recognition"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string out, data, checkpoint, split = "target", grid, fault;
  std::vector<std::string> clips;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic paired dataset");
  add_common(gen, common);
  gen->add_option("--out", out, "output directory")->required();

  auto* tr = app.add_subcommand("train", "train and write checkpoint + metrics");
  add_common(tr, common);
  tr->add_option("--data", data, "dataset directory (default: generate from config)");
  tr->add_option("--out", out, "output directory")->required();

  auto* ev = app.add_subcommand("eval", "single-branch inference on a test split");
  ev->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--split", split, "source or target")->check(CLI::IsMember({"source", "target"}));
  ev->add_option("--out", out, "output directory (default: eval_<split>)");

  auto* ab = app.add_subcommand("ablate", "train every cell of a grid");
  add_common(ab, common);
  ab->add_option("--grid", grid, "grid file, one 'key = v1, v2' line per axis")->required()->check(CLI::ExistingFile);
  ab->add_option("--out", out, "output directory")->required();

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite on a tiny config");
  add_common(gc, common);
  gc->add_option("--inject-fault", fault, "")->group("");

  auto* ex = app.add_subcommand("export-attn", "dump attention maps and class-token features");
  ex->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  ex->add_option("--clip", clips, "source clip and target clip")->required()->expected(2)->check(CLI::ExistingFile);
  ex->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_data(common, out);
    if (*tr) return cmd_train(common, data, out);
    if (*ev) return cmd_eval(checkpoint, data, split, out);
    if (*ab) return cmd_ablate(common, grid, out);
    if (*gc) return cmd_gradcheck(common, fault);
    if (*ex) return cmd_export(checkpoint, clips, out);
  } catch (const dkt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const dkt::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
