#include <fstream>
#include <set>

#include "pclmp/cli.hpp"
#include "pclmp/error.hpp"

namespace pclmp::cli {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& msg) {
  throw Error(Errc::InvalidConfig, field + ": " + msg);
}

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) bad(where.empty() ? "<root>" : where, "must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) bad(where.empty() ? key : where + "." + key, "unknown key");
}

std::string path_of(const std::string& where, const char* key) { return where.empty() ? key : where + "." + key; }

void read(const json& j, const std::string& where, const char* key, double& out) {
  if (!j.contains(key)) return;
  if (!j[key].is_number()) bad(path_of(where, key), "must be a number");
  out = j[key].get<double>();
}

void read(const json& j, const std::string& where, const char* key, int& out) {
  if (!j.contains(key)) return;
  if (!j[key].is_number_integer()) bad(path_of(where, key), "must be an integer");
  out = j[key].get<int>();
}

void read(const json& j, const std::string& where, const char* key, std::uint64_t& out) {
  if (!j.contains(key)) return;
  if (!j[key].is_number_unsigned() && !(j[key].is_number_integer() && j[key].get<long long>() >= 0))
    bad(path_of(where, key), "must be a non-negative integer");
  out = j[key].get<std::uint64_t>();
}

void read(const json& j, const std::string& where, const char* key, bool& out) {
  if (!j.contains(key)) return;
  if (!j[key].is_boolean()) bad(path_of(where, key), "must be a boolean");
  out = j[key].get<bool>();
}

// Re-throws a validator's message with the JSON path prefixed.
template <typename F>
void validate_in(const std::string& where, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    if (e.code() != Errc::InvalidConfig) throw;
    std::string msg = e.what();
    const std::string prefix = std::string(errc_name(Errc::InvalidConfig)) + ": ";
    if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
    throw Error(Errc::InvalidConfig, where + "." + msg);
  }
}

}  // namespace

void RunConfig::validate() const {
  validate_in("hyper", [&] { train.hp.validate(); });
  if (train.epochs < 0) bad("epochs", "must be >= 0");
  if (train.embed_dim < 1) bad("encoder.embed_dim", "must be >= 1");
  for (auto h : train.hidden_dims)
    if (h < 1) bad("encoder.hidden_dims", "entries must be >= 1");
  if (!(train.crossmodal_weight >= 0.0)) bad("ablation.crossmodal_weight", "must be >= 0");
  if (synthetic.has_value() == input.has_value()) bad("data", "exactly one of synthetic or input is required");
  if (synthetic) validate_in("data.synthetic", [&] { synthetic->validate(); });
  if (checkpoint_every < 0) bad("checkpoint_every", "must be >= 0");
  if (out.empty()) bad("out", "must not be empty");
}

RunConfig parse_run_config(const json& j) {
  check_keys(j, "", {"schema_version", "seed", "epochs", "hyper", "encoder", "ablation", "data", "out",
                     "checkpoint_every", "verbose"});
  if (!j.contains("schema_version")) bad("schema_version", "is required");
  if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kSchemaVersion)
    bad("schema_version", "must be " + std::to_string(kSchemaVersion));

  RunConfig cfg;
  read(j, "", "seed", cfg.train.seed);
  read(j, "", "epochs", cfg.train.epochs);
  read(j, "", "checkpoint_every", cfg.checkpoint_every);
  read(j, "", "verbose", cfg.verbose);
  if (j.contains("out")) {
    if (!j["out"].is_string()) bad("out", "must be a string");
    cfg.out = j["out"].get<std::string>();
  }

  if (j.contains("hyper")) {
    const auto& h = j["hyper"];
    check_keys(h, "hyper", {"tau", "alpha", "beta", "lambda", "e_cpcl", "k", "M", "eps", "min_pts", "P", "K", "lr",
                            "lr_decay_every", "lr_decay_factor"});
    auto& hp = cfg.train.hp;
    read(h, "hyper", "tau", hp.tau);
    read(h, "hyper", "alpha", hp.alpha);
    read(h, "hyper", "beta", hp.beta);
    read(h, "hyper", "lambda", hp.lambda);
    read(h, "hyper", "e_cpcl", hp.e_cpcl);
    read(h, "hyper", "k", hp.k);
    read(h, "hyper", "M", hp.M);
    read(h, "hyper", "eps", hp.eps);
    read(h, "hyper", "min_pts", hp.min_pts);
    read(h, "hyper", "P", hp.P);
    read(h, "hyper", "K", hp.K);
    read(h, "hyper", "lr", hp.lr);
    read(h, "hyper", "lr_decay_every", hp.lr_decay_every);
    read(h, "hyper", "lr_decay_factor", hp.lr_decay_factor);
  }

  if (j.contains("encoder")) {
    const auto& e = j["encoder"];
    check_keys(e, "encoder", {"hidden_dims", "embed_dim"});
    if (e.contains("hidden_dims")) {
      if (!e["hidden_dims"].is_array()) bad("encoder.hidden_dims", "must be an array of integers");
      cfg.train.hidden_dims.clear();
      for (const auto& v : e["hidden_dims"]) {
        if (!v.is_number_integer() || v.get<long long>() < 1) bad("encoder.hidden_dims", "entries must be positive integers");
        cfg.train.hidden_dims.push_back(v.get<std::size_t>());
      }
    }
    int embed = static_cast<int>(cfg.train.embed_dim);
    read(e, "encoder", "embed_dim", embed);
    if (embed < 1) bad("encoder.embed_dim", "must be >= 1");
    cfg.train.embed_dim = static_cast<std::size_t>(embed);
  }

  if (j.contains("ablation")) {
    const auto& a = j["ablation"];
    check_keys(a, "ablation", {"enable_hpcl", "enable_dpcl", "enable_pcl_schedule", "enable_crossmodal_loss",
                               "keep_cpcl_after_switch", "crossmodal_weight"});
    auto& ab = cfg.train.ablation;
    read(a, "ablation", "enable_hpcl", ab.enable_hpcl);
    read(a, "ablation", "enable_dpcl", ab.enable_dpcl);
    read(a, "ablation", "enable_pcl_schedule", ab.enable_pcl_schedule);
    read(a, "ablation", "enable_crossmodal_loss", ab.enable_crossmodal_loss);
    read(a, "ablation", "keep_cpcl_after_switch", ab.keep_cpcl_after_switch);
    read(a, "ablation", "crossmodal_weight", cfg.train.crossmodal_weight);
  }

  if (j.contains("data")) {
    const auto& d = j["data"];
    check_keys(d, "data", {"synthetic", "input"});
    if (d.contains("synthetic") == d.contains("input")) bad("data", "exactly one of synthetic or input is required");
    if (d.contains("input")) {
      if (!d["input"].is_string()) bad("data.input", "must be a string path");
      cfg.input = d["input"].get<std::string>();
      cfg.synthetic.reset();
    } else {
      const auto& s = d["synthetic"];
      check_keys(s, "data.synthetic", {"n_identities", "d_in", "samples_per_id_per_modality", "intra_id_spread",
                                       "modality_shift", "noise_fraction", "seed"});
      SynthConfig sc;
      read(s, "data.synthetic", "n_identities", sc.n_identities);
      read(s, "data.synthetic", "d_in", sc.d_in);
      read(s, "data.synthetic", "samples_per_id_per_modality", sc.samples_per_id_per_modality);
      read(s, "data.synthetic", "intra_id_spread", sc.intra_id_spread);
      read(s, "data.synthetic", "modality_shift", sc.modality_shift);
      read(s, "data.synthetic", "noise_fraction", sc.noise_fraction);
      read(s, "data.synthetic", "seed", sc.seed);
      cfg.synthetic = sc;
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidConfig, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

nlohmann::ordered_json to_json(const RunConfig& cfg) {
  const auto& hp = cfg.train.hp;
  const auto& ab = cfg.train.ablation;
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["seed"] = cfg.train.seed;
  j["epochs"] = cfg.train.epochs;
  j["hyper"] = {{"tau", hp.tau},
                {"alpha", hp.alpha},
                {"beta", hp.beta},
                {"lambda", hp.lambda},
                {"e_cpcl", hp.e_cpcl},
                {"k", hp.k},
                {"M", hp.M},
                {"eps", hp.eps},
                {"min_pts", hp.min_pts},
                {"P", hp.P},
                {"K", hp.K},
                {"lr", hp.lr},
                {"lr_decay_every", hp.lr_decay_every},
                {"lr_decay_factor", hp.lr_decay_factor}};
  j["encoder"] = {{"hidden_dims", cfg.train.hidden_dims}, {"embed_dim", cfg.train.embed_dim}};
  j["ablation"] = {{"enable_hpcl", ab.enable_hpcl},
                   {"enable_dpcl", ab.enable_dpcl},
                   {"enable_pcl_schedule", ab.enable_pcl_schedule},
                   {"enable_crossmodal_loss", ab.enable_crossmodal_loss},
                   {"keep_cpcl_after_switch", ab.keep_cpcl_after_switch},
                   {"crossmodal_weight", cfg.train.crossmodal_weight}};
  if (cfg.synthetic) {
    const auto& s = *cfg.synthetic;
    j["data"]["synthetic"] = {{"n_identities", s.n_identities},
                              {"d_in", s.d_in},
                              {"samples_per_id_per_modality", s.samples_per_id_per_modality},
                              {"intra_id_spread", s.intra_id_spread},
                              {"modality_shift", s.modality_shift},
                              {"noise_fraction", s.noise_fraction},
                              {"seed", s.seed}};
  } else {
    j["data"]["input"] = cfg.input->string();
  }
  j["out"] = cfg.out.string();
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["verbose"] = cfg.verbose;
  return j;
}

void apply_ablation_preset(RunConfig& cfg, const std::string& name) {
  auto& ab = cfg.train.ablation;
  if (name == "baseline") {
    ab.enable_hpcl = false;
    ab.enable_dpcl = false;
    ab.enable_pcl_schedule = false;
  } else if (name == "hpcl") {
    ab.enable_hpcl = true;
    ab.enable_dpcl = false;
    ab.enable_pcl_schedule = false;
  } else if (name == "dpcl") {
    ab.enable_hpcl = false;
    ab.enable_dpcl = true;
    ab.enable_pcl_schedule = false;
  } else if (name == "unscheduled") {
    ab.enable_hpcl = true;
    ab.enable_dpcl = true;
    ab.enable_pcl_schedule = false;
  } else if (name == "pclmp") {
    ab.enable_hpcl = true;
    ab.enable_dpcl = true;
    ab.enable_pcl_schedule = true;
  } else {
    bad("ablate", "unknown preset '" + name + "' (baseline, hpcl, dpcl, unscheduled, pclmp)");
  }
}

Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.synthetic) return generate_synthetic(*cfg.synthetic);
  return load_features(*cfg.input, format_for(*cfg.input));
}

}  // namespace pclmp::cli
