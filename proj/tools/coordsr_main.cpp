#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "coordsr/checkpoint.hpp"
#include "coordsr/dataset.hpp"
#include "coordsr/errors.hpp"
#include "coordsr/evaluate.hpp"
#include "coordsr/ft1.hpp"
#include "coordsr/png_io.hpp"
#include "coordsr/study_export.hpp"
#include "coordsr/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace coordsr;

namespace {

struct ExitError : std::runtime_error {
  int code;
  ExitError(int c, const std::string& m) : std::runtime_error(m), code(c) {}
};

void write_text(const fs::path& p, const std::string& s) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  os << s;
  if (!os) throw std::runtime_error("cannot write " + p.string());
}

std::string read_text(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + p.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Checkpoint open_checkpoint(const fs::path& dir) {
  if (!fs::exists(dir / "descriptor.json")) throw ExitError(1, "no checkpoint at " + dir.string());
  return load_checkpoint(dir);
}

// <run>/checkpoints/<name> -> dataset recorded in <run>/resolved-config.json
fs::path dataset_from_checkpoint(const fs::path& ckpt) {
  const fs::path cfg = ckpt.parent_path().parent_path() / "resolved-config.json";
  if (!fs::exists(cfg)) return {};
  return load_train_config(cfg).dataset;
}

struct TrainFlags {
  std::string config;
  std::string out;
  std::string dataset;
  std::string model;
  std::vector<double> scale_range;
  double lambda = 0.0;
  double sigma = 0.0;
  std::int64_t steps = 0;
  std::uint64_t seed = 0;
  int tile = 0;
  int batch = 0;
  std::int64_t eval_every = 0;
  double lr = 0.0;
  bool liif = false;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--config", f.config, "Training config JSON (its values win over flags)");
  cmd->add_option("--out", f.out, "Run directory")->required();
  cmd->add_option("--dataset", f.dataset, "Dataset directory with manifest.json");
  cmd->add_option("--model", f.model, "Model kind")->check(CLI::IsMember({"coord", "conv"}));
  cmd->add_option("--scale-range", f.scale_range, "s_min s_max")->expected(2);
  cmd->add_option("--lambda", f.lambda, "Denoiser regularization weight");
  cmd->add_option("--sigma", f.sigma, "Denoiser strength");
  cmd->add_option("-T,--steps", f.steps, "Training steps");
  cmd->add_option("--seed", f.seed, "Seed");
  cmd->add_option("--tile", f.tile, "HR tile side");
  cmd->add_option("--batch", f.batch, "Tiles per step");
  cmd->add_option("--eval-every", f.eval_every, "Validation cadence (0 = log-spaced)");
  cmd->add_option("--lr", f.lr, "Adam learning rate");
  cmd->add_flag("--liif", f.liif, "Append neighbor offsets to decoder inputs");
}

// Flags fill fields the config file leaves unset; conflicting values keep
// the file's value.
TrainConfig resolve_train_config(CLI::App* cmd, const TrainFlags& f) {
  json j = json::object();
  if (!f.config.empty()) {
    try {
      j = json::parse(read_text(f.config));
    } catch (const json::exception& e) {
      throw ConfigError(f.config + ": " + e.what());
    }
  }
  auto merge = [&](const char* flag, const char* key, const json& v) {
    if (cmd->count(flag) == 0) return;
    if (j.contains(key) && j[key] != v) {
      std::cerr << "warning: " << flag << " " << v.dump() << " ignored; config file sets " << key << " = "
                << j[key].dump() << "\n";
      return;
    }
    j[key] = v;
  };
  merge("--dataset", "dataset", f.dataset);
  merge("--model", "model", f.model);
  if (f.scale_range.size() == 2) merge("--scale-range", "scale_range", f.scale_range);
  merge("--lambda", "lambda", f.lambda);
  merge("--sigma", "sigma", f.sigma);
  merge("--steps", "T", f.steps);
  merge("--seed", "seed", f.seed);
  merge("--tile", "tile_hr", f.tile);
  merge("--batch", "batch", f.batch);
  merge("--eval-every", "eval_every", f.eval_every);
  merge("--lr", "lr", f.lr);
  merge("--liif", "liif_mode", f.liif);
  TrainConfig cfg = parse_train_config(j.dump());
  if (cfg.dataset.empty()) throw ConfigError("invalid training config:\n  dataset: required");
  if (cfg.dataset.is_relative() && !f.config.empty() && j.contains("dataset") && cmd->count("--dataset") == 0) {
    cfg.dataset = fs::path(f.config).parent_path() / cfg.dataset;
  }
  cfg.validate();
  return cfg;
}

void print_point(const CurvePoint& p) {
  std::fprintf(stderr, "step %lld  loss %.5f  val_psnr %.3f  val_vif %.4f\n", static_cast<long long>(p.step),
               p.train_loss, p.val_psnr, p.val_vif);
}

Split split_flag(const std::string& s) {
  try {
    return parse_split(s);
  } catch (const std::exception&) {
    throw ConfigError("unknown split '" + s + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scale-agnostic super-resolution for MR-like images"};
  app.require_subcommand(1);

  SimulateOptions sim;
  std::string sim_kind, sim_input, sim_out;
  auto* simulate = app.add_subcommand("simulate", "Generate a noisy dataset and manifest");
  simulate->add_option("--kind", sim_kind, "Phantom kind")->check(CLI::IsMember({"shepp_logan", "texture", "edges"}));
  simulate->add_option("--input-dir", sim_input, "Ingest PNG/FT1 images instead of phantoms")->check(CLI::ExistingDirectory);
  simulate->add_option("--n", sim.n, "Phantom side length")->capture_default_str();
  simulate->add_option("--count", sim.count, "Number of phantoms")->capture_default_str();
  simulate->add_option("--sigma-k", sim.sigma_k, "k-space noise std (per real/imag part)")->capture_default_str();
  simulate->add_option("--coils", sim.coils, "Receive coils (1 = uniform sensitivity)")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "Seed")->capture_default_str();
  simulate->add_option("--out", sim_out, "Output dataset directory")->required();

  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  add_train_flags(train_cmd, tf);

  TrainFlags sf;
  std::vector<double> lambdas{0.0, 1.0, 10.0};
  auto* sweep = app.add_subcommand("sweep", "Train once per lambda value");
  add_train_flags(sweep, sf);
  sweep->add_option("--lambdas", lambdas, "Lambda values")->delimiter(',')->capture_default_str();

  std::string ev_ckpt, ev_dataset, ev_split = "test", ev_out, ev_json;
  double ev_scale = 2.0, ev_lambda = 0.0;
  bool ev_bicubic = false;
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a dataset split");
  eval->add_option("--checkpoint", ev_ckpt, "Checkpoint directory")->required();
  eval->add_option("--dataset", ev_dataset, "Dataset directory (default: the run's dataset)");
  eval->add_option("--split", ev_split, "train|val|test")->capture_default_str();
  eval->add_option("--scale", ev_scale, "Downsampling factor")->capture_default_str();
  eval->add_option("--out", ev_out, "Report CSV (default: stdout)");
  eval->add_option("--json", ev_json, "Also write a JSON report");
  eval->add_flag("--with-bicubic", ev_bicubic, "Add the bicubic baseline row");
  eval->add_option("--lambda", ev_lambda, "Lambda to echo in the JSON report");

  std::string in_ckpt, in_input, in_output;
  double in_scale = 0.0;
  std::vector<int> in_size;
  auto* infer = app.add_subcommand("infer", "Super-resolve one image");
  infer->add_option("--checkpoint", in_ckpt, "Checkpoint directory")->required();
  infer->add_option("--input", in_input, "Input .png or .ft1")->required()->check(CLI::ExistingFile);
  infer->add_option("--output", in_output, "Output .png or .ft1")->required();
  auto* in_scale_opt = infer->add_option("--scale", in_scale, "Upsampling factor");
  infer->add_option("--size", in_size, "Output rows cols")->expected(2)->excludes(in_scale_opt);

  std::string ex_a, ex_b, ex_dataset, ex_split = "test", ex_out, ex_id = "study", ex_la, ex_lb;
  double ex_scale = 2.0;
  std::uint64_t ex_seed = 0;
  auto* exp = app.add_subcommand("export-study", "Write blinded reader-study pairs and a sealed key");
  exp->add_option("--checkpoint-a", ex_a, "Method A checkpoint")->required();
  exp->add_option("--checkpoint-b", ex_b, "Method B checkpoint")->required();
  exp->add_option("--dataset", ex_dataset, "Dataset directory (default: run A's dataset)");
  exp->add_option("--split", ex_split, "train|val|test")->capture_default_str();
  exp->add_option("--scale", ex_scale, "Super-resolution factor")->capture_default_str();
  exp->add_option("--seed", ex_seed, "Side-assignment seed")->capture_default_str();
  exp->add_option("--study-id", ex_id, "Study id")->capture_default_str();
  exp->add_option("--label-a", ex_la, "Method A label for the key (default: checkpoint path)");
  exp->add_option("--label-b", ex_lb, "Method B label for the key (default: checkpoint path)");
  exp->add_option("--out", ex_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*simulate) {
      if (!sim_input.empty()) {
        sim.kind.reset();
        sim.input_dir = sim_input;
      } else if (!sim_kind.empty()) {
        sim.kind = parse_phantom_kind(sim_kind);
      }
      const DatasetManifest m = simulate_dataset(sim, sim_out);
      std::fprintf(stderr, "wrote %zu items (%zu/%zu/%zu) to %s\n", m.items.size(), m.split(Split::train).size(),
                   m.split(Split::val).size(), m.split(Split::test).size(), sim_out.c_str());
    } else if (*train_cmd) {
      const TrainConfig cfg = resolve_train_config(train_cmd, tf);
      const TrainResult r = train(cfg, tf.out, print_point);
      std::fprintf(stderr, "best step %lld (val psnr %.3f dB)\n", static_cast<long long>(r.best_step), r.best_psnr);
    } else if (*sweep) {
      const TrainConfig base = resolve_train_config(sweep, sf);
      std::string table = "lambda,step,train_loss,val_psnr,val_vif,wall_ms\n";
      for (double lam : lambdas) {
        TrainConfig cfg = base;
        cfg.lambda = lam;
        char name[64];
        std::snprintf(name, sizeof name, "lambda_%g", lam);
        std::fprintf(stderr, "== %s\n", name);
        const TrainResult r = train(cfg, fs::path(sf.out) / name, print_point);
        std::istringstream csv(curve_csv(r.curve));
        std::string line;
        std::getline(csv, line);
        char lam_s[32];
        std::snprintf(lam_s, sizeof lam_s, "%g", lam);
        while (std::getline(csv, line)) table += std::string(lam_s) + "," + line + "\n";
      }
      write_text(fs::path(sf.out) / "sweep.csv", table);
    } else if (*eval) {
      const Checkpoint ck = open_checkpoint(ev_ckpt);
      fs::path ds = ev_dataset.empty() ? dataset_from_checkpoint(ev_ckpt) : fs::path(ev_dataset);
      if (ds.empty()) throw ConfigError("--dataset is required for this checkpoint");
      EvalOptions opt;
      opt.split = split_flag(ev_split);
      opt.scale = ev_scale;
      opt.with_bicubic = ev_bicubic;
      if (eval->count("--lambda")) opt.lambda = ev_lambda;
      const MetricReport rep = evaluate(&ck.model, ds, opt);
      if (ev_out.empty()) {
        std::fputs(rep.to_csv().c_str(), stdout);
      } else {
        write_text(ev_out, rep.to_csv());
      }
      if (!ev_json.empty()) write_text(ev_json, rep.to_json());
      std::fprintf(stderr, "mean psnr %.3f dB  vif %.4f\n", rep.mean.psnr_db, rep.mean.vif);
      if (rep.bicubic_mean) {
        std::fprintf(stderr, "bicubic psnr %.3f dB  vif %.4f\n", rep.bicubic_mean->psnr_db, rep.bicubic_mean->vif);
      }
    } else if (*infer) {
      const Checkpoint ck = open_checkpoint(in_ckpt);
      const ImageGrid x = read_image(in_input);
      int rows = 0, cols = 0;
      if (in_size.size() == 2) {
        rows = in_size[0];
        cols = in_size[1];
      } else {
        const double s = infer->count("--scale") ? in_scale : 2.0;
        rows = static_cast<int>(std::lround(x.rows() * s));
        cols = static_cast<int>(std::lround(x.cols() * s));
      }
      if (rows < 1 || cols < 1) throw ConfigError("output size must be positive");
      const ImageGrid y = ck.model.infer(x, rows, cols);
      if (fs::path(in_output).extension() == ".ft1") {
        write_image_ft1(in_output, y);
      } else {
        write_png_gray(in_output, y);
      }
    } else if (*exp) {
      try {
        const Checkpoint a = open_checkpoint(ex_a);
        const Checkpoint b = open_checkpoint(ex_b);
        fs::path ds = ex_dataset.empty() ? dataset_from_checkpoint(ex_a) : fs::path(ex_dataset);
        if (ds.empty()) throw ConfigError("--dataset is required for this checkpoint");
        StudyExportOptions opt;
        opt.split = split_flag(ex_split);
        opt.scale = ex_scale;
        opt.seed = ex_seed;
        opt.study_id = ex_id;
        opt.label_a = ex_la.empty() ? ex_a : ex_la;
        opt.label_b = ex_lb.empty() ? ex_b : ex_lb;
        const StudyExportResult r = export_study(a.model, b.model, ds, opt, ex_out);
        std::fprintf(stderr, "wrote %zu pairs to %s\n", r.pair_ids.size(), (fs::path(ex_out) / "study").c_str());
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        throw ExitError(1, e.what());
      }
    }
  } catch (const ExitError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
