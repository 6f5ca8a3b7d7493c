// End-to-end checks of the command-line binary: every subcommand is run as a
// subprocess and judged on exit code, stdout/stderr, and the files it leaves
// behind. The binary path arrives via the GLNET_BIN environment variable.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "glnet/glnet.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

const std::string& cli_path() {
  static const std::string path = [] {
    const char* env = std::getenv("GLNET_BIN");
    return env && *env ? std::string(env) : std::string("./glnet");
  }();
  return path;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path out = fs::path(testing::TempDir()) / ("cli_out_" + std::to_string(counter));
  const fs::path err = fs::path(testing::TempDir()) / ("cli_err_" + std::to_string(counter));
  ++counter;
  const std::string cmd =
      "\"" + cli_path() + "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  fs::remove(out);
  fs::remove(err);
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::path(testing::TempDir()) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

bool files_equal(const fs::path& a, const fs::path& b) { return slurp(a) == slurp(b); }

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text) n += c == '\n' ? 1 : 0;
  return n;
}

const char* kTinyTrainConfig = R"({
  "seed": 3,
  "model": {"group_size": 2, "input_side": 16, "channels": 8, "stride": 4, "sa_kernel": 3},
  "train": {"iterations": 5, "lr_init": 0.001, "lr_min": 0.00001, "augment": true}
})";

// Renders a tiny dataset and trains a matching checkpoint once; later tests
// reuse the artifacts instead of paying for another training run.
struct Workspace {
  fs::path data;
  fs::path config;
  fs::path ckpt;

  Workspace() {
    data = fresh_dir("cli_ws_data");
    const RunResult synth = run_cli("synth --out \"" + data.string() +
                                    "\" --groups 2 --group-size 2 --side 16 --seed 9");
    EXPECT_EQ(synth.code, 0) << synth.err;
    config = fs::path(testing::TempDir()) / "cli_ws_config.json";
    write_text(config, kTinyTrainConfig);
    const fs::path out_dir = fresh_dir("cli_ws_ckpt");
    ckpt = out_dir / "model.bin";
    const RunResult train = run_cli("train --data \"" + data.string() + "\" --config \"" +
                                    config.string() + "\" --out \"" + ckpt.string() + "\"");
    EXPECT_EQ(train.code, 0) << train.err;
  }
};

const Workspace& workspace() {
  static Workspace ws;
  return ws;
}

// --- synth ------------------------------------------------------------------------

TEST(CliSynth, WritesWellFormedDatasetDeterministically) {
  const fs::path d1 = fresh_dir("cli_synth_a");
  const fs::path d2 = fresh_dir("cli_synth_b");
  const std::string args = " --groups 2 --group-size 3 --side 32 --seed 5";
  const RunResult r1 = run_cli("synth --out \"" + d1.string() + "\"" + args);
  ASSERT_EQ(r1.code, 0) << r1.err;
  EXPECT_NE(r1.out.find("group_000 category "), std::string::npos);
  EXPECT_NE(r1.out.find("wrote 2 groups"), std::string::npos);

  std::vector<fs::path> files;
  for (int g = 0; g < 2; ++g) {
    const fs::path dir = d1 / ("group_00" + std::to_string(g));
    ASSERT_TRUE(fs::is_directory(dir));
    for (int i = 0; i < 3; ++i) {
      const std::string stem = "img_00" + std::to_string(i);
      ASSERT_TRUE(fs::exists(dir / (stem + ".ppm")));
      ASSERT_TRUE(fs::exists(dir / (stem + "_gt.pgm")));
      files.push_back(dir / (stem + ".ppm"));
      files.push_back(dir / (stem + "_gt.pgm"));
    }
  }
  // ground truth is bi-level and images decode to the advertised extents
  for (int i = 0; i < 3; ++i) {
    const glnet::Tensor gt =
        glnet::read_pgm((d1 / "group_000" / ("img_00" + std::to_string(i) + "_gt.pgm")).string());
    ASSERT_EQ(gt.shape(), (glnet::Shape{1, 32, 32}));
    for (std::int64_t j = 0; j < gt.size(); ++j) {
      ASSERT_TRUE(gt.data()[j] == 0.f || gt.data()[j] == 1.f);
    }
  }
  const glnet::Tensor img = glnet::read_ppm((d1 / "group_000" / "img_000.ppm").string());
  ASSERT_EQ(img.shape(), (glnet::Shape{3, 32, 32}));

  const RunResult r2 = run_cli("synth --out \"" + d2.string() + "\"" + args);
  ASSERT_EQ(r2.code, 0) << r2.err;
  for (const fs::path& f : files) {
    EXPECT_TRUE(files_equal(f, d2 / fs::relative(f, d1))) << f;
  }

  const fs::path d3 = fresh_dir("cli_synth_c");
  const RunResult r3 =
      run_cli("synth --out \"" + d3.string() + "\" --groups 2 --group-size 3 --side 32 --seed 6");
  ASSERT_EQ(r3.code, 0) << r3.err;
  EXPECT_FALSE(files_equal(d1 / "group_000" / "img_000.ppm", d3 / "group_000" / "img_000.ppm"));
}

TEST(CliSynth, RejectsBadArguments) {
  EXPECT_EQ(run_cli("synth").code, 2);  // --out is required
  const fs::path d = fresh_dir("cli_synth_bad");
  EXPECT_EQ(run_cli("synth --out \"" + d.string() + "\" --groups 0").code, 2);
  EXPECT_EQ(run_cli("synth --out \"" + d.string() + "\" --side 8").code, 2);
  EXPECT_EQ(run_cli("synth --out \"" + d.string() + "\" --bogus-flag 1").code, 2);
}

// --- train ------------------------------------------------------------------------

TEST(CliTrain, ProducesCheckpointAndLogDeterministically) {
  const Workspace& ws = workspace();
  ASSERT_TRUE(fs::exists(ws.ckpt));
  const fs::path default_log = fs::path(ws.ckpt.string() + ".loss.csv");
  ASSERT_TRUE(fs::exists(default_log));
  const std::string log_text = slurp(default_log);
  EXPECT_EQ(log_text.substr(0, 13), "step,loss,lr\n");
  EXPECT_EQ(count_lines(log_text), 6);  // header + one row per iteration

  // an identical rerun reproduces the checkpoint and the log byte for byte
  const fs::path out2 = fresh_dir("cli_train_rerun");
  const fs::path ckpt2 = out2 / "model.bin";
  const fs::path log2 = out2 / "loss.csv";
  const RunResult r = run_cli("train --data \"" + ws.data.string() + "\" --config \"" +
                              ws.config.string() + "\" --out \"" + ckpt2.string() + "\" --log \"" +
                              log2.string() + "\"");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("step 0 loss "), std::string::npos);
  EXPECT_NE(r.out.find("checkpoint "), std::string::npos);
  EXPECT_TRUE(files_equal(ws.ckpt, ckpt2));
  EXPECT_EQ(slurp(default_log), slurp(log2));
}

TEST(CliTrain, PathsCanComeFromTheConfigFile) {
  const Workspace& ws = workspace();
  const fs::path out_dir = fresh_dir("cli_train_paths");
  const fs::path ckpt = out_dir / "model.bin";
  const fs::path cfg = fs::path(testing::TempDir()) / "cli_train_paths.json";
  write_text(cfg, std::string(R"({
  "seed": 3,
  "model": {"group_size": 2, "input_side": 16, "channels": 8, "stride": 4, "sa_kernel": 3},
  "train": {"iterations": 2},
  "paths": {"data": ")") +
                      ws.data.string() + R"(", "out": ")" + ckpt.string() + R"("}
})");
  const RunResult r = run_cli("train --config \"" + cfg.string() + "\"");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(ckpt));
}

TEST(CliTrain, RejectsBrokenConfigs) {
  const Workspace& ws = workspace();
  const fs::path dir = fresh_dir("cli_train_bad");
  const std::string tail =
      " --data \"" + ws.data.string() + "\" --out \"" + (dir / "ck.bin").string() + "\"";

  const fs::path unknown = dir / "unknown.json";
  write_text(unknown, R"({"seed": 1, "modle": {}})");
  RunResult r = run_cli("train --config \"" + unknown.string() + "\"" + tail);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("unknown key 'modle'"), std::string::npos) << r.err;

  const fs::path nested = dir / "nested.json";
  write_text(nested, R"({"model": {"group_sizes": 2}})");
  r = run_cli("train --config \"" + nested.string() + "\"" + tail);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("model.group_sizes"), std::string::npos) << r.err;

  const fs::path malformed = dir / "malformed.json";
  write_text(malformed, R"({"seed": })");
  r = run_cli("train --config \"" + malformed.string() + "\"" + tail);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("malformed JSON"), std::string::npos) << r.err;

  const fs::path wrong_type = dir / "wrong_type.json";
  write_text(wrong_type, R"({"train": {"iterations": "many"}})");
  r = run_cli("train --config \"" + wrong_type.string() + "\"" + tail);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("must be a number"), std::string::npos) << r.err;

  const fs::path invalid = dir / "invalid.json";
  write_text(invalid, R"({"model": {"group_size": 1}})");
  EXPECT_EQ(run_cli("train --config \"" + invalid.string() + "\"" + tail).code, 2);

  EXPECT_EQ(run_cli("train --config \"" + (dir / "missing.json").string() + "\"" + tail).code, 2);
  EXPECT_EQ(run_cli("train" + tail).code, 2);  // --config is required

  const fs::path ok = dir / "ok.json";
  write_text(ok, kTinyTrainConfig);
  r = run_cli("train --config \"" + ok.string() + "\" --out \"" + (dir / "ck.bin").string() +
              "\"");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("no dataset directory"), std::string::npos) << r.err;
}

// --- infer ------------------------------------------------------------------------

TEST(CliInfer, WritesDeterministicMapsAtTheInputExtents) {
  const Workspace& ws = workspace();
  const fs::path p1 = fresh_dir("cli_infer_a");
  const fs::path p2 = fresh_dir("cli_infer_b");
  const std::string base = "infer --ckpt \"" + ws.ckpt.string() + "\" --data \"" +
                           ws.data.string() + "\" --out \"";
  const RunResult r1 = run_cli(base + p1.string() + "\"");
  ASSERT_EQ(r1.code, 0) << r1.err;
  EXPECT_NE(r1.out.find("wrote 4 maps"), std::string::npos) << r1.out;
  for (int g = 0; g < 2; ++g) {
    for (int i = 0; i < 2; ++i) {
      const fs::path map =
          p1 / ("group_00" + std::to_string(g)) / ("img_00" + std::to_string(i) + ".pgm");
      ASSERT_TRUE(fs::exists(map)) << map;
      const glnet::Tensor t = glnet::read_pgm(map.string());
      ASSERT_EQ(t.shape(), (glnet::Shape{1, 16, 16}));
    }
  }
  const RunResult r2 = run_cli(base + p2.string() + "\"");
  ASSERT_EQ(r2.code, 0) << r2.err;
  for (int g = 0; g < 2; ++g) {
    for (int i = 0; i < 2; ++i) {
      const std::string rel =
          "group_00" + std::to_string(g) + "/img_00" + std::to_string(i) + ".pgm";
      EXPECT_TRUE(files_equal(p1 / rel, p2 / rel)) << rel;
    }
  }
}

TEST(CliInfer, ResizesLargerInputsAndRestoresTheirExtents) {
  const Workspace& ws = workspace();
  const fs::path data24 = fresh_dir("cli_infer_24");
  ASSERT_EQ(run_cli("synth --out \"" + data24.string() +
                    "\" --groups 1 --group-size 2 --side 24 --seed 12")
                .code,
            0);
  const fs::path out = fresh_dir("cli_infer_24_maps");
  const RunResult r = run_cli("infer --ckpt \"" + ws.ckpt.string() + "\" --data \"" +
                              data24.string() + "\" --out \"" + out.string() + "\"");
  ASSERT_EQ(r.code, 0) << r.err;
  const glnet::Tensor t = glnet::read_pgm((out / "group_000" / "img_000.pgm").string());
  ASSERT_EQ(t.shape(), (glnet::Shape{1, 24, 24}));
}

TEST(CliInfer, RejectsMismatchedGroupsAndMissingCheckpoints) {
  const Workspace& ws = workspace();
  const fs::path data3 = fresh_dir("cli_infer_wrong_n");
  ASSERT_EQ(run_cli("synth --out \"" + data3.string() +
                    "\" --groups 1 --group-size 3 --side 16 --seed 13")
                .code,
            0);
  const fs::path out = fresh_dir("cli_infer_wrong_n_maps");
  RunResult r = run_cli("infer --ckpt \"" + ws.ckpt.string() + "\" --data \"" + data3.string() +
                        "\" --out \"" + out.string() + "\"");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("expects groups of 2"), std::string::npos) << r.err;

  r = run_cli("infer --ckpt \"/nonexistent/ck.bin\" --data \"" + ws.data.string() +
              "\" --out \"" + out.string() + "\"");
  EXPECT_EQ(r.code, 2);
}

// --- eval -------------------------------------------------------------------------

TEST(CliEval, PerfectPredictionsScorePerfectly) {
  const Workspace& ws = workspace();
  const fs::path pred = fresh_dir("cli_eval_pred");
  for (const auto& group : fs::directory_iterator(ws.data)) {
    if (!group.is_directory()) continue;
    fs::create_directories(pred / group.path().filename());
    for (const auto& f : fs::directory_iterator(group.path())) {
      const std::string name = f.path().filename().string();
      if (name.size() > 7 && name.substr(name.size() - 7) == "_gt.pgm") {
        const std::string id = name.substr(0, name.size() - 7);
        fs::copy_file(f.path(), pred / group.path().filename() / (id + ".pgm"));
      }
    }
  }
  const fs::path report = fs::path(testing::TempDir()) / "cli_eval_report.json";
  const fs::path pr = fs::path(testing::TempDir()) / "cli_eval_pr.csv";
  const RunResult r = run_cli("eval --pred \"" + pred.string() + "\" --gt \"" + ws.data.string() +
                              "\" --out \"" + report.string() + "\" --pr \"" + pr.string() +
                              "\" --per-group");
  ASSERT_EQ(r.code, 0) << r.err;

  double max_f = 0, s = 0, max_e = 0, mae = 1;
  ASSERT_EQ(std::sscanf(r.out.c_str(), "max_f %lf s %lf max_e %lf mae %lf", &max_f, &s, &max_e,
                        &mae),
            4)
      << r.out;
  EXPECT_GE(max_f, 0.999);
  EXPECT_GE(s, 0.95);
  EXPECT_GE(max_e, 0.99);
  EXPECT_LE(mae, 0.001);

  const nlohmann::json doc = nlohmann::json::parse(slurp(report));
  EXPECT_NEAR(doc.at("max_f").get<double>(), max_f, 1e-9);
  EXPECT_NEAR(doc.at("mae").get<double>(), mae, 1e-9);
  ASSERT_TRUE(doc.contains("per_group"));
  EXPECT_EQ(doc.at("per_group").size(), 2u);
  EXPECT_GE(doc.at("per_group").at("group_000").at("max_f").get<double>(), 0.999);

  const std::string pr_text = slurp(pr);
  EXPECT_EQ(pr_text.substr(0, 27), "threshold,precision,recall\n");
  EXPECT_EQ(count_lines(pr_text), 257);  // header + one row per 8-bit threshold
  fs::remove(report);
  fs::remove(pr);
}

TEST(CliEval, ReportsMissingInputs) {
  const Workspace& ws = workspace();
  const fs::path empty_pred = fresh_dir("cli_eval_empty_pred");
  RunResult r = run_cli("eval --pred \"" + empty_pred.string() + "\" --gt \"" + ws.data.string() +
                        "\" --out \"" + (empty_pred / "rep.json").string() + "\"");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("no prediction for"), std::string::npos) << r.err;

  r = run_cli("eval --pred \"" + empty_pred.string() + "\" --gt \"/nonexistent/gt\" --out \"" +
              (empty_pred / "rep.json").string() + "\"");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("gt directory"), std::string::npos) << r.err;
}

// --- gradcheck ----------------------------------------------------------------------

TEST(CliGradcheck, FullSuitePassesAndPrintsEveryModule) {
  const RunResult r = run_cli("gradcheck --seed 7");
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  const char* modules[] = {"conv2d", "conv3d", "transposed_conv", "matmul",
                           "softmax", "rowmax", "channel_attention", "spatial_attention",
                           "gcm", "pct", "lcm_fuse", "gla",
                           "aewf", "decoder", "backbone", "full_model"};
  for (const char* m : modules) {
    EXPECT_NE(r.out.find(std::string("\n") + m), std::string::npos) << m;
  }
  EXPECT_NE(r.out.find("all gradient checks passed"), std::string::npos);
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST(CliGradcheck, InjectedFaultIsCaught) {
  const RunResult r = run_cli("gradcheck --seed 7 --inject-fault");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
  EXPECT_NE(r.err.find("gradcheck"), std::string::npos) << r.err;
}

// --- usage --------------------------------------------------------------------------

TEST(CliUsage, HelpWorksAndBadInvocationsExitWithUsageError) {
  const RunResult help = run_cli("--help");
  EXPECT_EQ(help.code, 0);
  for (const char* sub : {"synth", "train", "infer", "eval", "gradcheck"}) {
    EXPECT_NE(help.out.find(sub), std::string::npos) << sub;
  }
  EXPECT_EQ(run_cli("").code, 2);             // a subcommand is required
  EXPECT_EQ(run_cli("frobnicate").code, 2);   // unknown subcommand
  EXPECT_EQ(run_cli("eval --pred x").code, 2);  // missing required --gt
}

}  // namespace
