#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "pclmp/cli.hpp"
#include "pclmp/error.hpp"

namespace pclmp::cli {

namespace fs = std::filesystem;

namespace {

enum class Level { Error = 0, Info = 1, Debug = 2 };

// stderr honours XPCL_LOG; run.log always gets everything, timestamped.
class Log {
 public:
  Log() {
    if (const char* env = std::getenv("XPCL_LOG")) {
      const std::string v = env;
      if (v == "error") level_ = Level::Error;
      if (v == "debug") level_ = Level::Debug;
    }
  }

  void attach(const fs::path& file) { file_.open(file, std::ios::app); }

  void write(Level lvl, const std::string& msg) {
    static const char* names[] = {"error", "info", "debug"};
    if (lvl <= level_) std::cerr << "[" << names[static_cast<int>(lvl)] << "] " << msg << '\n';
    if (file_) {
      const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
      char ts[32];
      std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%S", std::localtime(&now));
      file_ << ts << " [" << names[static_cast<int>(lvl)] << "] " << msg << '\n';
      file_.flush();
    }
  }

 private:
  Level level_ = Level::Info;
  std::ofstream file_;
};

Log& logger() {
  static Log log;
  return log;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << text;
}

void write_matches(const fs::path& path, const CrossModalMatch& match) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << "vis_cluster,ir_cluster,similarity\n";
  char buf[32];
  for (const auto& p : match.pairs) {
    std::snprintf(buf, sizeof buf, "%.17g", p.similarity);
    out << p.visible << ',' << p.infrared << ',' << buf << '\n';
  }
}

// phi_m embeddings in dataset order, with the dataset's modalities and ids.
void write_embeddings(const fs::path& path, const Trainer& trainer, const Dataset& data) {
  Dataset dump;
  dump.dim = trainer.config().embed_dim;
  dump.records.resize(data.records.size());
  for (Modality m : {Modality::Visible, Modality::Infrared}) {
    const Matrix emb = trainer.embed(m, true);
    const auto idx = data.indices_of(m);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto& rec = dump.records[idx[i]];
      rec.raw = emb.row_vec(i);
      rec.modality = m;
      rec.true_id = data.records[idx[i]].true_id;
    }
  }
  save_features(dump, path, FeatureFormat::XpclBinary);
}

std::string epoch_tag(int epoch) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", epoch);
  return buf;
}

std::string summarize(const EpochReport& r) {
  std::ostringstream os;
  os << "epoch " << r.epoch << " loss=" << r.loss_total << " rank1=" << r.rank1 << " mAP=" << r.map
     << " ARI(rgb/ir/all)=" << r.ari_rgb << "/" << r.ari_ir << "/" << r.ari_all << " clusters=" << r.n_clusters_v << "/"
     << r.n_clusters_r;
  return os.str();
}

int fail(int code, const std::string& msg) {
  logger().write(Level::Error, msg);
  return code;
}

template <typename F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    const bool config = e.code() == Errc::InvalidConfig;
    return fail(config ? kExitConfig : kExitRuntime, e.what());
  } catch (const std::exception& e) {
    return fail(kExitRuntime, e.what());
  }
}

}  // namespace

RunResult run_training(const RunConfig& cfg, const std::optional<fs::path>& resume) {
  cfg.validate();
  fs::create_directories(cfg.out);
  logger().attach(cfg.out / "run.log");
  write_text(cfg.out / "config.resolved.json", to_json(cfg).dump(2) + "\n");

  const Dataset data = load_dataset(cfg);
  Trainer trainer(data, cfg.train);
  if (resume) {
    trainer.restore(load_checkpoint(*resume));
    logger().write(Level::Info, "resumed from " + resume->string() + " at epoch " +
                                    std::to_string(trainer.state().epoch));
  }

  std::ofstream metrics(cfg.out / "metrics.csv");
  if (!metrics) throw Error(Errc::IoError, "cannot write metrics.csv");
  write_metrics_header(metrics);

  RunResult result;
  result.reports = train(trainer, data, [&](const EpochReport& r) {
    write_metrics_row(metrics, r);
    metrics.flush();
    logger().write(Level::Info, summarize(r));
    if (cfg.verbose && trainer.state().match)
      write_matches(cfg.out / ("matches_epoch_" + epoch_tag(r.epoch) + ".csv"), *trainer.state().match);
    if (cfg.checkpoint_every > 0 && r.epoch > 0 && r.epoch % cfg.checkpoint_every == 0)
      save_checkpoint(trainer.checkpoint(), cfg.out / ("checkpoint_epoch_" + epoch_tag(r.epoch) + ".xpck"));
  });

  if (!result.reports.empty()) write_text(cfg.out / "report.json", report_to_json(result.reports.back()));
  save_checkpoint(trainer.checkpoint(), cfg.out / "checkpoint.xpck");
  write_embeddings(cfg.out / "embeddings.xpcl", trainer, data);
  if (trainer.state().match) write_matches(cfg.out / "matches.csv", *trainer.state().match);
  return result;
}

namespace {

std::vector<std::string> split_values(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_generate(const SynthConfig& sc, const fs::path& out) {
  return guarded([&] {
    const Dataset data = generate_synthetic(sc);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    fs::path sidecar = out;
    sidecar.replace_extension(".csv");
    if (sidecar == out) throw Error(Errc::InvalidConfig, "output path must not end in .csv (the CSV sidecar uses it)");
    save_features(data, out, FeatureFormat::XpclBinary);
    save_features(data, sidecar, FeatureFormat::Csv);
    logger().write(Level::Info, "wrote " + std::to_string(data.records.size()) + " records to " + out.string());
    return kExitOk;
  });
}

struct TrainArgs {
  std::string config, data, out, ablate, resume;
  int epochs = -1;
  long long seed = -1;
};

RunConfig resolve(const TrainArgs& a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  if (!a.data.empty()) {
    cfg.input = a.data;
    cfg.synthetic.reset();
  }
  if (!a.out.empty()) cfg.out = a.out;
  if (!a.ablate.empty()) apply_ablation_preset(cfg, a.ablate);
  if (a.epochs >= 0) cfg.train.epochs = a.epochs;
  if (a.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(a.seed);
  cfg.validate();
  return cfg;
}

int cmd_train(const TrainArgs& a) {
  return guarded([&] {
    const RunConfig cfg = resolve(a);
    std::optional<fs::path> resume;
    if (!a.resume.empty()) resume = a.resume;
    run_training(cfg, resume);
    return kExitOk;
  });
}

int cmd_eval(const TrainArgs& a, const std::string& checkpoint) {
  return guarded([&] {
    const RunConfig cfg = resolve(a);
    fs::create_directories(cfg.out);
    const Dataset data = load_dataset(cfg);
    Trainer trainer(data, cfg.train);
    const Checkpoint ckpt = load_checkpoint(checkpoint);
    trainer.restore(ckpt);
    trainer.prepare_epoch(ckpt.epoch);
    trainer.refresh_match();
    const EpochReport r = evaluate(trainer, data, ckpt.epoch, {});
    write_text(cfg.out / "report.json", report_to_json(r));
    write_embeddings(cfg.out / "embeddings.xpcl", trainer, data);
    write_matches(cfg.out / "matches.csv", *trainer.state().match);
    logger().write(Level::Info, summarize(r));
    return kExitOk;
  });
}

int cmd_sweep(const TrainArgs& a, const std::string& param, const std::string& values, int parallel) {
  return guarded([&] {
    if (param != "lambda" && param != "k") throw Error(Errc::InvalidConfig, "param must be lambda or k");
    const auto vals = split_values(values);
    if (vals.empty()) throw Error(Errc::InvalidConfig, "values: at least one value is required");
    const RunConfig base = resolve(a);

    std::vector<RunConfig> runs;
    for (const auto& v : vals) {
      RunConfig cfg = base;
      try {
        std::size_t used = 0;
        if (param == "lambda") {
          cfg.train.hp.lambda = std::stod(v, &used);
        } else {
          cfg.train.hp.k = std::stoi(v, &used);
        }
        if (used != v.size()) throw std::invalid_argument(v);
      } catch (const std::logic_error&) {
        throw Error(Errc::InvalidConfig, "values: cannot parse '" + v + "' for " + param);
      }
      cfg.out = base.out / (param + "_" + v);
      cfg.validate();
      runs.push_back(std::move(cfg));
    }

    const std::size_t width = static_cast<std::size_t>(std::max(parallel, 1));
    for (std::size_t start = 0; start < runs.size(); start += width) {
      const std::size_t end = std::min(runs.size(), start + width);
      if (width == 1) {
        run_training(runs[start]);
        continue;
      }
      std::vector<pid_t> children;
      for (std::size_t i = start; i < end; ++i) {
        std::cout.flush();
        std::cerr.flush();
        const pid_t pid = fork();
        if (pid < 0) throw Error(Errc::IoError, "fork failed");
        if (pid == 0) _exit(guarded([&] {
            run_training(runs[i]);
            return kExitOk;
          }));
        children.push_back(pid);
      }
      for (pid_t pid : children) {
        int status = 0;
        waitpid(pid, &status, 0);
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) throw Error(Errc::IoError, "a sweep run failed");
      }
    }

    std::ofstream summary(base.out / "sweep.csv");
    summary << "param,value,rank1,rank5,rank10,rank20,map,ari_rgb,ari_ir,ari_all\n";
    for (std::size_t i = 0; i < runs.size(); ++i) {
      std::ifstream in(runs[i].out / "report.json");
      const auto r = nlohmann::json::parse(in);
      auto val = [&](const char* key) {
        if (r[key].is_null()) return std::string();
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", r[key].get<double>());
        return std::string(buf);
      };
      summary << param << ',' << vals[i] << ',' << val("rank1") << ',' << val("rank5") << ',' << val("rank10") << ','
              << val("rank20") << ',' << val("map") << ',' << val("ari_rgb") << ',' << val("ari_ir") << ','
              << val("ari_all") << '\n';
    }
    return kExitOk;
  });
}

void add_run_options(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--config", a.config, "Run configuration JSON");
  cmd->add_option("--data", a.data, "Feature file (.csv or xpcl binary) instead of synthetic data");
  cmd->add_option("--out", a.out, "Output directory");
  cmd->add_option("--ablate", a.ablate, "Preset: baseline, hpcl, dpcl, unscheduled, pclmp");
  cmd->add_option("--epochs", a.epochs, "Override epoch count");
  cmd->add_option("--seed", a.seed, "Override run seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Progressive multi-prototype contrastive learning on feature vectors"};
  app.require_subcommand(1);

  SynthConfig sc;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "Write a synthetic two-modality dataset");
  gen->add_option("-o,--out", gen_out, "Output xpcl file (a .csv sidecar is written next to it)")->required();
  gen->add_option("--identities", sc.n_identities);
  gen->add_option("--dim", sc.d_in);
  gen->add_option("--samples", sc.samples_per_id_per_modality, "Samples per identity per modality");
  gen->add_option("--sigma", sc.intra_id_spread);
  gen->add_option("--shift", sc.modality_shift);
  gen->add_option("--noise", sc.noise_fraction);
  gen->add_option("--seed", sc.seed);

  TrainArgs train_args;
  auto* tr = app.add_subcommand("train", "Train and write metrics, report, checkpoint and embeddings");
  add_run_options(tr, train_args);
  tr->add_option("--resume", train_args.resume, "Checkpoint to continue from");

  TrainArgs eval_args;
  std::string checkpoint;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_run_options(ev, eval_args);
  ev->add_option("--checkpoint", checkpoint)->required();

  TrainArgs sweep_args;
  std::string param, values;
  int parallel = 1;
  auto* sw = app.add_subcommand("sweep", "Run one training per parameter value");
  add_run_options(sw, sweep_args);
  sw->add_option("--param", param, "lambda or k")->required();
  sw->add_option("--values", values, "Comma-separated values")->required();
  sw->add_option("--parallel", parallel, "Concurrent runs (separate processes)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  if (*gen) return cmd_generate(sc, gen_out);
  if (*tr) return cmd_train(train_args);
  if (*ev) return cmd_eval(eval_args, checkpoint);
  return cmd_sweep(sweep_args, param, values, parallel);
}

}  // namespace pclmp::cli
