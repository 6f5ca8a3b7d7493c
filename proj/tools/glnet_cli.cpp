// Command-line surface: synth / train / infer / eval / gradcheck.
//
// Exit codes: 0 success, 1 verification failure, 2 usage or input error,
// 3 numerical abort.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "glnet/glnet.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
  glnet::ModelConfig model;
  glnet::TrainConfig train;
  std::uint64_t seed = 0;
  std::string data_dir;
  std::string out_path;
  std::string log_path;
};

void require_keys(const json& obj, const std::string& where,
                  std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || it.key() == k;
    if (!ok) {
      throw glnet::ConfigError("config: unknown key '" +
                               (where.empty() ? it.key() : where + "." + it.key()) + "'");
    }
  }
}

template <typename T>
T get_number(const json& obj, const std::string& where, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) {
    throw glnet::ConfigError("config: '" + where + "." + key + "' must be a number");
  }
  return v.get<T>();
}

bool get_bool(const json& obj, const std::string& where, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) {
    throw glnet::ConfigError("config: '" + where + "." + key + "' must be a boolean");
  }
  return v.get<bool>();
}

std::string get_string(const json& obj, const std::string& where, const char* key,
                       const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) {
    throw glnet::ConfigError("config: '" + where + "." + key + "' must be a string");
  }
  return v.get<std::string>();
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw glnet::IoError("config: cannot open: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw glnet::ConfigError("config: malformed JSON in " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw glnet::ConfigError("config: top level must be a JSON object");
  require_keys(doc, "", {"seed", "model", "train", "paths"});
  RunConfig cfg;
  cfg.seed = get_number<std::uint64_t>(doc, "", "seed", 0);
  if (doc.contains("model")) {
    const json& m = doc.at("model");
    if (!m.is_object()) throw glnet::ConfigError("config: 'model' must be an object");
    require_keys(m, "model",
                 {"group_size", "input_side", "channels", "stride", "disable_gcm", "disable_lcm",
                  "gcm_use_2d", "ca_ratio", "sa_kernel", "pct_shared_projection"});
    auto& mc = cfg.model;
    mc.group_size = get_number<int>(m, "model", "group_size", mc.group_size);
    mc.input_side = get_number<int>(m, "model", "input_side", mc.input_side);
    mc.channels = get_number<int>(m, "model", "channels", mc.channels);
    mc.stride = get_number<int>(m, "model", "stride", mc.stride);
    mc.disable_gcm = get_bool(m, "model", "disable_gcm", mc.disable_gcm);
    mc.disable_lcm = get_bool(m, "model", "disable_lcm", mc.disable_lcm);
    mc.gcm_use_2d = get_bool(m, "model", "gcm_use_2d", mc.gcm_use_2d);
    mc.ca_ratio = get_number<int>(m, "model", "ca_ratio", mc.ca_ratio);
    mc.sa_kernel = get_number<int>(m, "model", "sa_kernel", mc.sa_kernel);
    mc.pct_shared_projection =
        get_bool(m, "model", "pct_shared_projection", mc.pct_shared_projection);
  }
  if (doc.contains("train")) {
    const json& t = doc.at("train");
    if (!t.is_object()) throw glnet::ConfigError("config: 'train' must be an object");
    require_keys(t, "train",
                 {"iterations", "batch", "lr_init", "lr_min", "weight_decay", "augment",
                  "log_every"});
    auto& tc = cfg.train;
    tc.iterations = get_number<int>(t, "train", "iterations", tc.iterations);
    tc.batch = get_number<int>(t, "train", "batch", tc.batch);
    tc.lr_init = get_number<float>(t, "train", "lr_init", tc.lr_init);
    tc.lr_min = get_number<float>(t, "train", "lr_min", tc.lr_min);
    tc.weight_decay = get_number<float>(t, "train", "weight_decay", tc.weight_decay);
    tc.augment = get_bool(t, "train", "augment", tc.augment);
    tc.log_every = get_number<int>(t, "train", "log_every", tc.log_every);
  }
  if (doc.contains("paths")) {
    const json& p = doc.at("paths");
    if (!p.is_object()) throw glnet::ConfigError("config: 'paths' must be an object");
    require_keys(p, "paths", {"data", "out", "log"});
    cfg.data_dir = get_string(p, "paths", "data", "");
    cfg.out_path = get_string(p, "paths", "out", "");
    cfg.log_path = get_string(p, "paths", "log", "");
  }
  cfg.model.validate();
  cfg.train.seed = cfg.seed;
  cfg.train.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------
int cmd_synth(const std::string& out_dir, int groups, int group_size, int side,
              std::uint64_t seed) {
  glnet::SynthConfig cfg;
  cfg.n_groups = groups;
  cfg.group_size = group_size;
  cfg.side = side;
  cfg.seed = seed;
  std::vector<glnet::SynthGroupMeta> meta;
  const std::vector<glnet::ImageGroup> data = glnet::synth_dataset(cfg, &meta);
  fs::create_directories(out_dir);
  for (const auto& group : data) glnet::write_group(out_dir, group);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::cout << data[i].id << " category " << meta[i].category.name() << "\n";
  }
  std::cout << "wrote " << data.size() << " groups to " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& config_path,
              const std::string& out_path, const std::string& log_path, int threads) {
  RunConfig cfg = parse_run_config(config_path);
  if (!data_dir.empty()) cfg.data_dir = data_dir;
  if (!out_path.empty()) cfg.out_path = out_path;
  if (!log_path.empty()) cfg.log_path = log_path;
  if (cfg.data_dir.empty()) throw glnet::ConfigError("train: no dataset directory given");
  if (cfg.out_path.empty()) throw glnet::ConfigError("train: no checkpoint output path given");
  if (cfg.log_path.empty()) cfg.log_path = cfg.out_path + ".loss.csv";
  const fs::path out_parent = fs::path(cfg.out_path).parent_path();
  if (!out_parent.empty() && !fs::is_directory(out_parent)) {
    throw glnet::ConfigError("train: output directory does not exist: " + out_parent.string());
  }
  glnet::set_threads(threads);
  const std::vector<glnet::DiskGroup> disk = glnet::scan_dataset(cfg.data_dir, true);
  std::vector<glnet::ImageGroup> data;
  data.reserve(disk.size());
  for (const auto& g : disk) data.push_back(glnet::load_group(g, cfg.model.input_side, true));
  glnet::GLNet model(cfg.model);
  model.init_parameters(cfg.seed);
  const std::vector<glnet::TrainLogRow> log =
      glnet::train(model, data, cfg.train, &std::cout);
  glnet::write_train_log_csv(cfg.log_path, log);
  glnet::save_checkpoint(model, cfg.out_path, cfg.train.iterations);
  std::printf("checkpoint %s final_loss %.6f\n", cfg.out_path.c_str(), log.back().loss);
  return 0;
}

int cmd_infer(const std::string& ckpt_path, const std::string& data_dir,
              const std::string& out_dir, int threads) {
  glnet::set_threads(threads);
  glnet::LoadedCheckpoint loaded = glnet::load_checkpoint(ckpt_path);
  glnet::GLNet& model = *loaded.model;
  const std::vector<glnet::DiskGroup> disk = glnet::scan_dataset(data_dir, false);
  fs::create_directories(out_dir);
  glnet::NoGradGuard no_grad;
  int written = 0;
  for (const auto& g : disk) {
    if (static_cast<int>(g.entries.size()) != model.config.group_size) {
      throw glnet::ConfigError("infer: group '" + g.id + "' has " +
                               std::to_string(g.entries.size()) + " images but the checkpoint " +
                               "expects groups of " + std::to_string(model.config.group_size));
    }
    std::vector<glnet::Tensor> images;
    std::vector<std::pair<int, int>> extents;  // (h, w) of the original files
    for (const auto& entry : g.entries) {
      glnet::Tensor img = glnet::read_ppm(entry.image.string());
      extents.emplace_back(img.extent(1), img.extent(2));
      if (img.extent(1) != model.config.input_side || img.extent(2) != model.config.input_side) {
        img = glnet::bilinear_resize(img, model.config.input_side, model.config.input_side);
      }
      images.push_back(img);
    }
    const std::vector<glnet::Tensor> maps = model.forward_group(images);
    fs::create_directories(fs::path(out_dir) / g.id);
    for (std::size_t i = 0; i < maps.size(); ++i) {
      glnet::Tensor map = maps[i];
      if (map.extent(1) != extents[i].first || map.extent(2) != extents[i].second) {
        map = glnet::bilinear_resize(map, extents[i].first, extents[i].second);
      }
      const fs::path out = fs::path(out_dir) / g.id / (g.entries[i].id + ".pgm");
      glnet::write_pgm(out.string(), map);
      ++written;
    }
  }
  std::cout << "wrote " << written << " maps to " << out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& out_path,
             const std::string& pr_path, bool per_group) {
  glnet::MetricConfig mcfg;
  const float gt_level = static_cast<float>(mcfg.gt_binarize_level) / 255.0f;
  glnet::check(fs::is_directory(gt_dir), "eval: gt directory does not exist: " + gt_dir,
               glnet::IoError{""});
  glnet::check(fs::is_directory(pred_dir), "eval: prediction directory does not exist: " + pred_dir,
               glnet::IoError{""});
  std::vector<fs::path> group_dirs;
  for (const auto& e : fs::directory_iterator(gt_dir)) {
    if (e.is_directory()) group_dirs.push_back(e.path());
  }
  std::sort(group_dirs.begin(), group_dirs.end());
  std::vector<glnet::MapPair> pairs;
  std::map<std::string, std::vector<glnet::MapPair>> group_pairs;
  for (const auto& dir : group_dirs) {
    std::vector<fs::path> gts;
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string name = e.path().filename().string();
      if (e.is_regular_file() && name.size() > 7 &&
          name.substr(name.size() - 7) == "_gt.pgm") {
        gts.push_back(e.path());
      }
    }
    std::sort(gts.begin(), gts.end());
    for (const auto& gt_path : gts) {
      const std::string stem = gt_path.stem().string();           // "<id>_gt"
      const std::string id = stem.substr(0, stem.size() - 3);     // "<id>"
      const fs::path pred_path = fs::path(pred_dir) / dir.filename() / (id + ".pgm");
      if (!fs::exists(pred_path)) {
        throw glnet::IoError("eval: no prediction for " + gt_path.string() + " (expected " +
                             pred_path.string() + ")");
      }
      glnet::Tensor gt = glnet::read_pgm(gt_path.string());
      float* gp = gt.data();
      for (std::int64_t i = 0; i < gt.size(); ++i) gp[i] = gp[i] >= gt_level ? 1.0f : 0.0f;
      glnet::Tensor pred = glnet::read_pgm(pred_path.string());
      if (pred.extent(1) != gt.extent(1) || pred.extent(2) != gt.extent(2)) {
        pred = glnet::bilinear_resize(pred, gt.extent(1), gt.extent(2));
      }
      pairs.push_back({pred, gt});
      if (per_group) group_pairs[dir.filename().string()].push_back(pairs.back());
    }
  }
  const glnet::MetricReport report = glnet::compute_metrics(pairs, mcfg);
  std::map<std::string, glnet::MetricReport> per_group_reports;
  if (per_group) {
    for (const auto& [name, gp] : group_pairs) {
      per_group_reports[name] = glnet::compute_metrics(gp, mcfg);
    }
  }
  glnet::write_report_json(out_path, report, per_group ? &per_group_reports : nullptr);
  if (!pr_path.empty()) glnet::write_pr_csv(pr_path, report.pr);
  std::printf("max_f %.6f s %.6f max_e %.6f mae %.6f\n", report.max_f, report.s, report.max_e,
              report.mae);
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, bool inject_fault) {
  const std::vector<glnet::GradCheckResult> results =
      glnet::run_gradcheck_suite(seed, inject_fault ? 0.05 : 0.0);
  bool all_ok = true;
  std::printf("%-20s %-12s %s\n", "module", "max_rel", "status");
  for (const auto& r : results) {
    const bool ok = r.passed();
    all_ok = all_ok && ok;
    std::printf("%-20s %-12.3e %s\n", r.module.c_str(), r.max_rel, ok ? "ok" : "FAIL");
  }
  if (!all_ok) throw glnet::VerificationError("gradcheck: at least one module failed");
  std::cout << "all gradient checks passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Co-salient object detection: dataset synthesis, training, inference, evaluation"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic co-salient dataset");
  std::string synth_out;
  int synth_groups = 4, synth_group_size = 5, synth_side = 160;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "Output dataset directory")->required();
  synth->add_option("--groups", synth_groups, "Number of groups");
  synth->add_option("--group-size", synth_group_size, "Images per group");
  synth->add_option("--side", synth_side, "Image side length in pixels");
  synth->add_option("--seed", synth_seed, "Generator seed");

  auto* train = app.add_subcommand("train", "Train a model on a dataset directory");
  std::string train_data, train_config, train_out, train_log;
  int train_threads = 1;
  train->add_option("--data", train_data, "Dataset directory");
  train->add_option("--config", train_config, "JSON run configuration")->required();
  train->add_option("--out", train_out, "Checkpoint output path");
  train->add_option("--log", train_log, "Loss log CSV path (default: <out>.loss.csv)");
  train->add_option("--threads", train_threads, "Worker threads (determinism: 1)");

  auto* infer = app.add_subcommand("infer", "Write co-saliency maps for a dataset");
  std::string infer_ckpt, infer_data, infer_out;
  int infer_threads = 1;
  infer->add_option("--ckpt", infer_ckpt, "Checkpoint path")->required();
  infer->add_option("--data", infer_data, "Dataset directory")->required();
  infer->add_option("--out", infer_out, "Output directory for PGM maps")->required();
  infer->add_option("--threads", infer_threads, "Worker threads (determinism: 1)");

  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  std::string eval_pred, eval_gt, eval_out = "report.json", eval_pr = "pr.csv";
  bool eval_per_group = false;
  eval->add_option("--pred", eval_pred, "Prediction directory")->required();
  eval->add_option("--gt", eval_gt, "Ground-truth dataset directory")->required();
  eval->add_option("--out", eval_out, "JSON report path");
  eval->add_option("--pr", eval_pr, "PR curve CSV path");
  eval->add_flag("--per-group", eval_per_group, "Include a per-group score table");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  std::uint64_t gc_seed = 7;
  bool gc_fault = false;
  gradcheck->add_option("--seed", gc_seed, "Suite seed");
  gradcheck->add_flag("--inject-fault", gc_fault)->group("");  // hidden: forces failure

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(synth)) {
      return cmd_synth(synth_out, synth_groups, synth_group_size, synth_side, synth_seed);
    }
    if (app.got_subcommand(train)) {
      return cmd_train(train_data, train_config, train_out, train_log, train_threads);
    }
    if (app.got_subcommand(infer)) {
      return cmd_infer(infer_ckpt, infer_data, infer_out, infer_threads);
    }
    if (app.got_subcommand(eval)) {
      return cmd_eval(eval_pred, eval_gt, eval_out, eval_pr, eval_per_group);
    }
    if (app.got_subcommand(gradcheck)) {
      return cmd_gradcheck(gc_seed, gc_fault);
    }
  } catch (const glnet::VerificationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const glnet::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const glnet::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const glnet::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const glnet::ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
