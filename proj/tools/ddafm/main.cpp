// SPDX-License-Identifier: Apache-2.0
//
// ddafm: delay-Doppler-angle channel reconstruction toolkit
// Copyright (C) 2026 The ddafm authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

// ddafm: dataset generation, training, evaluation and self-checks for the
// delay-Doppler-angle backbone.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 data error,
// 4 numeric failure.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ddafm/config.hpp"
#include "ddafm/dataio.hpp"
#include "ddafm/eval.hpp"
#include "ddafm/train.hpp"
#include "ddafm/transform.hpp"
#include "ddafm/verify.hpp"
#include "json.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ddafm::cli {
namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- config files ------------------------------------------------------

struct ConfigFile {
  json root = json::object();

  static ConfigFile load(const std::string& path) {
    ConfigFile c;
    if (path.empty()) return c;
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path);
    try {
      c.root = json::parse(in);
    } catch (const json::parse_error& e) {
      throw UsageError("config file " + path + " is not valid JSON: " + e.what());
    }
    if (!c.root.is_object()) throw UsageError("config file must hold a JSON object");
    static const std::vector<std::string> known{"scenario", "model", "train", "frames", "gen", "eval"};
    for (const auto& [key, _] : c.root.items())
      if (std::find(known.begin(), known.end(), key) == known.end())
        throw UsageError("unknown config section '" + key + "'");
    return c;
  }
  bool has(const char* section) const { return root.contains(section); }
  std::string section(const char* name) const { return root.at(name).dump(); }
};

FrameStructure frame_from_name(const std::string& name) {
  auto f = frame_preset(name);
  if (!f) {
    std::string names;
    for (const auto& n : frame_preset_names()) names += " " + n;
    throw UsageError("unknown frame '" + name + "' (known:" + names + ")");
  }
  return *f;
}

std::vector<FrameStructure> frames_from_config(const json& arr) {
  if (!arr.is_array()) throw UsageError("config 'frames' must be an array");
  std::vector<FrameStructure> frames;
  for (const json& item : arr) {
    if (item.is_string()) {
      frames.push_back(frame_from_name(item.get<std::string>()));
    } else {
      FrameStructure f;
      merge_json(f, item.dump());
      frames.push_back(f);
    }
  }
  return frames;
}

std::vector<MaskSpec> parse_tasks(const std::string& list) {
  std::vector<MaskSpec> out;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw UsageError("task '" + item + "' must look like TP:0.5 or CE:4");
    const Task t = parse_task(item.substr(0, colon));
    const std::string arg = item.substr(colon + 1);
    try {
      if (t == Task::CE)
        out.push_back(MaskSpec::channel_estimation(std::stoul(arg)));
      else if (t == Task::TP)
        out.push_back(MaskSpec::time_prediction(std::stod(arg)));
      else
        out.push_back(MaskSpec::frequency_prediction(std::stod(arg)));
    } catch (const std::logic_error&) {
      throw UsageError("bad task parameter in '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("no tasks given");
  return out;
}

json parse_json_text(const std::string& text) { return json::parse(text); }

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

// ---- gen ---------------------------------------------------------------

struct GenArgs {
  std::string config, out;
  std::vector<std::string> frames;
  std::optional<std::size_t> count;
  std::optional<std::uint64_t> seed;
  std::optional<double> snr;
  std::optional<double> snr_min, snr_max;
  std::string style;
  unsigned threads = 1;
};

int cmd_gen(const GenArgs& a, const std::vector<std::string>& argv) {
  const ConfigFile cf = ConfigFile::load(a.config);
  GenerateOptions opt;
  if (cf.has("scenario")) merge_json(opt.scenario, cf.section("scenario"));
  if (cf.has("frames")) opt.frames = frames_from_config(cf.root["frames"]);
  std::string style = "train";
  if (cf.has("gen")) {
    const json& g = cf.root["gen"];
    for (const auto& [key, v] : g.items()) {
      if (key == "count") opt.count = v.get<std::size_t>();
      else if (key == "seed") opt.seed = v.get<std::uint64_t>();
      else if (key == "snr_db") opt.fixed_snr_db = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
      else if (key == "snr_min_db") opt.snr_min_db = v.get<double>();
      else if (key == "snr_max_db") opt.snr_max_db = v.get<double>();
      else if (key == "style") style = v.get<std::string>();
      else throw UsageError("unknown field 'gen." + key + "'");
    }
  }
  if (!a.frames.empty()) {
    opt.frames.clear();
    for (const auto& n : a.frames) opt.frames.push_back(frame_from_name(n));
  }
  if (a.count) opt.count = *a.count;
  if (a.seed) opt.seed = *a.seed;
  if (!a.style.empty()) style = a.style;
  if (style == "eval") opt.fixed_snr_db = 10.0;
  else if (style != "train") throw UsageError("--style must be 'train' or 'eval'");
  if (a.snr_min) opt.snr_min_db = *a.snr_min;
  if (a.snr_max) opt.snr_max_db = *a.snr_max;
  if (a.snr) opt.fixed_snr_db = *a.snr;
  if (opt.frames.empty()) throw UsageError("no frame structure given (use --frame or a config 'frames' list)");
  opt.threads = a.threads;

  Manifest man("gen", argv);
  json frames = json::array();
  for (const auto& f : opt.frames) frames.push_back(parse_json_text(to_json(f)));
  man.set_config({{"scenario", parse_json_text(to_json(opt.scenario))},
                  {"frames", frames},
                  {"gen",
                   {{"count", opt.count},
                    {"seed", opt.seed},
                    {"snr_db", opt.fixed_snr_db ? json(*opt.fixed_snr_db) : json(nullptr)},
                    {"snr_min_db", opt.snr_min_db},
                    {"snr_max_db", opt.snr_max_db},
                    {"style", style}}}});
  man.add_seed("dataset", opt.seed);

  const Dataset ds = generate_dataset(opt);
  write_dataset(ds, fs::path(a.out));
  man.add_output(a.out);
  man.write(manifest_path_for(a.out));
  std::cout << "wrote " << ds.records.size() << " records to " << a.out << " (sha256 " << file_sha256(a.out) << ")\n";
  return 0;
}

// ---- train -------------------------------------------------------------

struct TrainArgs {
  std::string config, data, val, out, metrics, resume, plan = "desk";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> stage1_epochs, stage2_epochs, batch_size, val_limit;
  std::optional<std::size_t> checkpoint_every, stop_after;
  std::optional<std::size_t> embed_dim, heads, blocks, modules, window;
  std::optional<std::string> grid;
  bool deterministic = false;
  unsigned threads = 1;
};

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv) {
  const ConfigFile cf = ConfigFile::load(a.config);
  Curriculum plan;
  if (a.plan == "desk") plan = Curriculum::desk();
  else if (a.plan == "full") plan = Curriculum::full();
  else throw UsageError("--plan must be 'desk' or 'full'");
  if (cf.has("train")) merge_json(plan, cf.section("train"));
  if (a.seed) plan.seed = *a.seed;
  if (a.stage1_epochs) plan.stage1.epochs = *a.stage1_epochs;
  if (a.stage2_epochs) plan.stage2.epochs = *a.stage2_epochs;
  if (a.batch_size) plan.stage1.batch_size = plan.stage2.batch_size = *a.batch_size;
  plan.validate();

  Manifest man("train", argv);
  const Dataset train = read_dataset(fs::path(a.data));
  man.add_input(a.data);
  Dataset val;
  if (!a.val.empty()) {
    val = read_dataset(fs::path(a.val));
    man.add_input(a.val);
  }
  if (train.records.empty()) throw DataError("training file holds no records");

  ModelConfig cfg;
  bool grid_set = false, channels_set = false;
  if (cf.has("model")) {
    merge_json(cfg, cf.section("model"));
    grid_set = cf.root["model"].contains("n_t_max") || cf.root["model"].contains("n_f_max");
    channels_set = cf.root["model"].contains("in_channels");
  }
  if (a.embed_dim) cfg.embed_dim = *a.embed_dim;
  if (a.heads) cfg.heads = *a.heads;
  if (a.blocks) cfg.blocks_per_module = *a.blocks;
  if (a.modules) cfg.module_count = *a.modules;
  if (a.window) cfg.window_size = *a.window;
  if (a.grid) {
    const auto x = a.grid->find('x');
    if (x == std::string::npos) throw UsageError("--grid must look like 40x32");
    cfg.n_t_max = std::stoul(a.grid->substr(0, x));
    cfg.n_f_max = std::stoul(a.grid->substr(x + 1));
    grid_set = true;
  }
  if (!channels_set) cfg.in_channels = 2 * train.records[0].frame.n_rx();
  if (!grid_set) {
    // Smallest window-aligned grid holding every training and validation frame.
    std::size_t rows = 0, cols = 0;
    for (const std::vector<Record>* set : std::initializer_list<const std::vector<Record>*>{&train.records, &val.records})
      for (const Record& r : *set) {
        rows = std::max(rows, r.frame.n_t);
        cols = std::max(cols, r.frame.n_f);
      }
    const std::size_t w = cfg.window_size * cfg.patch_size;
    cfg.n_t_max = (rows + w - 1) / w * w;
    cfg.n_f_max = (cols + w - 1) / w * w;
  }
  cfg.validate();

  std::optional<Checkpoint> resume;
  if (!a.resume.empty()) {
    resume = load_checkpoint(a.resume);
    man.add_input(a.resume);
  }

  const fs::path out(a.out);
  const fs::path metrics_path = a.metrics.empty() ? fs::path(a.out + ".metrics.jsonl") : fs::path(a.metrics);
  std::ofstream metrics(metrics_path, resume ? std::ios::app : std::ios::trunc);
  if (!metrics) throw DataError("cannot write " + metrics_path.string());

  TrainOptions opt;
  opt.threads = a.threads;
  opt.checkpoint_path = out;
  opt.checkpoint_every = a.checkpoint_every.value_or(0);
  opt.metrics = &metrics;
  opt.stop_after_steps = a.stop_after;
  opt.validation_limit = a.val_limit.value_or(0);

  man.set_config({{"model", parse_json_text(to_json(cfg))},
                  {"train", parse_json_text(to_json(plan))},
                  {"deterministic", a.deterministic},
                  {"threads", a.threads}});
  man.add_seed("curriculum", plan.seed);

  const TrainResult res = run_curriculum(plan, cfg, train.records, val.records, opt, resume);
  metrics.close();
  man.add_output(out);
  man.add_output(metrics_path);
  man.set_note("global_step", res.cursor.global_step);
  man.set_note("finished", res.cursor.finished);
  man.write(manifest_path_for(out));

  std::cout << "steps: " << res.cursor.global_step << (res.cursor.finished ? " (finished)" : " (paused)") << "\n";
  if (!res.validation.empty()) {
    std::cout << "validation loss: " << to_db(res.validation.front().loss) << " dB -> "
              << to_db(res.validation.back().loss) << " dB\n";
  }
  std::cout << "checkpoint: " << out.string() << "\n";
  return 0;
}

// ---- eval --------------------------------------------------------------

struct EvalArgs {
  std::string config, checkpoint, data, out, tasks, plot_dir;
  bool kappa_sweep = false, pred_equals_gt = false, baselines_only = false;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

int cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv) {
  const ConfigFile cf = ConfigFile::load(a.config);
  EvalOptions opt;
  opt.tasks = parse_tasks("TP:0.5,TP:0.75,FP:0.5,FP:0.75,CE:2,CE:4");
  if (cf.has("eval")) {
    for (const auto& [key, v] : cf.root["eval"].items()) {
      if (key == "tasks") opt.tasks = parse_tasks(v.get<std::string>());
      else if (key == "kappa_sweep") opt.kappa_sweep = v.get<bool>();
      else if (key == "kappas") opt.kappas = v.get<std::vector<std::size_t>>();
      else throw UsageError("unknown field 'eval." + key + "'");
    }
  }
  if (!a.tasks.empty()) opt.tasks = parse_tasks(a.tasks);
  if (a.kappa_sweep) opt.kappa_sweep = true;
  opt.pred_equals_gt = a.pred_equals_gt;
  opt.threads = a.threads;
  opt.seed = a.seed;
  opt.run_model = !a.baselines_only;
  if (opt.run_model && a.checkpoint.empty() && !a.pred_equals_gt)
    throw UsageError("--checkpoint is required unless --baselines-only or --pred-equals-gt is given");

  Manifest man("eval", argv);
  const Dataset ds = read_dataset(fs::path(a.data));
  man.add_input(a.data);
  std::optional<Checkpoint> ck;
  if (!a.checkpoint.empty()) {
    ck = load_checkpoint(a.checkpoint);
    man.add_input(a.checkpoint);
  }
  std::optional<ModelConfig> cfg;
  std::optional<ParamStore> params;
  if (ck) {
    cfg = ck->model;
    params = ck->params;
  } else if (opt.run_model) {
    // pred = gt debug mode without a network: a placeholder config sized to the data.
    ModelConfig c;
    std::size_t rows = 0, cols = 0;
    for (const Record& r : ds.records) {
      rows = std::max(rows, r.frame.n_t);
      cols = std::max(cols, r.frame.n_f);
    }
    c.in_channels = ds.records.empty() ? c.in_channels : 2 * ds.records[0].frame.n_rx();
    c.n_t_max = (rows + c.window_size - 1) / c.window_size * c.window_size;
    c.n_f_max = (cols + c.window_size - 1) / c.window_size * c.window_size;
    cfg = c;
    params = ParamStore{};
  }
  const EvalReport report =
      evaluate(ds.records, cfg ? &*cfg : nullptr, params ? &*params : nullptr, opt);

  std::ostringstream text;
  report.write_text(text);
  write_text_file(a.out, text.str());
  const std::string json_path = a.out + ".json";
  write_text_file(json_path, report.to_json() + "\n");
  man.add_output(a.out);
  man.add_output(json_path);
  if (!a.plot_dir.empty()) {
    fs::create_directories(a.plot_dir);
    const fs::path csv = fs::path(a.plot_dir) / "nmse.csv";
    std::ofstream out(csv, std::ios::trunc);
    report.write_csv(out);
    out.close();
    man.add_output(csv);
  }
  std::string task_list;
  for (const auto& t : opt.tasks) task_list += (task_list.empty() ? "" : ",") + task_label(t);
  man.set_config({{"tasks", task_list},
                  {"kappa_sweep", opt.kappa_sweep},
                  {"kappas", opt.kappas},
                  {"pred_equals_gt", opt.pred_equals_gt},
                  {"baselines_only", a.baselines_only},
                  {"threads", a.threads}});
  man.add_seed("sensitivity_noise", opt.seed);
  man.write(manifest_path_for(a.out));
  std::cout << text.str();
  return 0;
}

// ---- transform ---------------------------------------------------------

struct TransformArgs {
  std::string data, out;
  std::size_t record = 0;
};

int cmd_transform(const TransformArgs& a, const std::vector<std::string>& argv) {
  Manifest man("transform", argv);
  const Dataset ds = read_dataset(fs::path(a.data));
  man.add_input(a.data);
  if (a.record >= ds.records.size())
    throw UsageError("record " + std::to_string(a.record) + " out of range (file holds " +
                     std::to_string(ds.records.size()) + ")");
  const Record& r = ds.records[a.record];
  const FrameStructure& f = r.frame;
  const CsiTensor gt = stf_to_dda(CsiTensor(Domain::STF, f, r.gt));
  const CsiTensor obs = stf_to_dda(CsiTensor(Domain::STF, f, r.obs));
  auto db = [](double p) { return p > 0.0 ? 10.0 * std::log10(p) : -300.0; };

  const fs::path dd = a.out + "_delay_doppler.csv";
  {
    std::ofstream out(dd, std::ios::trunc);
    out << "doppler_bin,delay_bin,doppler_hz,delay_s,gt_power_db,obs_power_db\n";
    for (std::size_t v = 0; v < f.n_t; ++v)
      for (std::size_t t = 0; t < f.n_f; ++t) {
        double pg = 0.0, po = 0.0;
        for (std::size_t q1 = 0; q1 < f.n_rx1; ++q1)
          for (std::size_t q2 = 0; q2 < f.n_rx2; ++q2) {
            pg += std::norm(gt.at(v, t, q1, q2));
            po += std::norm(obs.at(v, t, q1, q2));
          }
        const double nu = static_cast<double>(v) / (static_cast<double>(f.n_t) * f.dt);
        const double tau = static_cast<double>(t) / (static_cast<double>(f.n_f) * f.df);
        out << v << ',' << t << ',' << nu << ',' << tau << ',' << db(pg) << ',' << db(po) << '\n';
      }
  }
  const fs::path ang = a.out + "_angle.csv";
  {
    std::ofstream out(ang, std::ios::trunc);
    out << "q1,q2,gt_power_db,obs_power_db\n";
    for (std::size_t q1 = 0; q1 < f.n_rx1; ++q1)
      for (std::size_t q2 = 0; q2 < f.n_rx2; ++q2) {
        double pg = 0.0, po = 0.0;
        for (std::size_t v = 0; v < f.n_t; ++v)
          for (std::size_t t = 0; t < f.n_f; ++t) {
            pg += std::norm(gt.at(v, t, q1, q2));
            po += std::norm(obs.at(v, t, q1, q2));
          }
        out << q1 << ',' << q2 << ',' << db(pg) << ',' << db(po) << '\n';
      }
  }
  man.add_output(dd);
  man.add_output(ang);
  man.set_config({{"record", a.record}});
  man.write(manifest_path_for(a.out + "_delay_doppler.csv"));
  std::cout << "wrote " << dd.string() << " and " << ang.string() << "\n";
  return 0;
}

// ---- verify ------------------------------------------------------------

int cmd_verify(std::uint64_t seed, bool inject, const std::string& out, const std::vector<std::string>& argv) {
  VerifyOptions opt;
  opt.seed = seed;
  opt.inject_fft_sign_fault = inject;
  const auto results = run_verify_suite(opt);
  std::ostringstream text;
  const bool ok = write_verify_report(results, text);
  std::cout << text.str();
  if (!out.empty()) {
    write_text_file(out, text.str());
    Manifest man("verify", argv);
    man.set_config({{"inject_fft_sign_fault", inject}});
    man.add_seed("verify", seed);
    man.add_output(out);
    man.write(manifest_path_for(out));
  }
  return ok ? 0 : kExitNumeric;
}

int run(const std::vector<std::string>& args);

// ---- replay ------------------------------------------------------------

int cmd_replay(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest " + manifest_path);
  json m;
  try {
    m = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("manifest is not valid JSON: ") + e.what());
  }
  const auto argv = m.at("argv").get<std::vector<std::string>>();
  std::vector<std::pair<std::string, std::string>> expected;
  for (const json& o : m.at("outputs")) expected.emplace_back(o.at("path"), o.at("sha256"));
  std::cout << "replaying:";
  for (const auto& s : argv) std::cout << ' ' << s;
  std::cout << "\n";
  const int rc = run(argv);
  if (rc != 0) return rc;
  bool same = true;
  for (const auto& [path, digest] : expected) {
    const std::string now = file_sha256(path);
    const bool match = now == digest;
    same = same && match;
    std::cout << (match ? "match    " : "MISMATCH ") << path << "\n";
  }
  return same ? 0 : kExitData;
}

// ---- dispatch ----------------------------------------------------------

int run(const std::vector<std::string>& args) {
  CLI::App app{"Delay-Doppler-angle CSI backbone: gen, train, eval, verify, transform"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ddafm 0.1.0");

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic paired dataset");
  g->add_option("--out,-o", gen.out, "Output dataset file")->required();
  g->add_option("--frame", gen.frames, "Frame preset (repeatable), e.g. fs-a-denver");
  g->add_option("--count", gen.count, "Number of records");
  g->add_option("--seed", gen.seed, "Base seed");
  g->add_option("--snr", gen.snr, "Fixed SNR in dB");
  g->add_option("--snr-min", gen.snr_min, "Lower SNR bound in dB (train style)");
  g->add_option("--snr-max", gen.snr_max, "Upper SNR bound in dB (train style)");
  g->add_option("--style", gen.style, "train: SNR ~ U[5,20] dB; eval: 10 dB");
  g->add_option("--config", gen.config, "JSON config file");
  g->add_option("--threads", gen.threads, "Worker threads");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Run the two-stage curriculum");
  t->add_option("--data", tr.data, "Training dataset")->required();
  t->add_option("--val", tr.val, "Validation dataset");
  t->add_option("--out,-o", tr.out, "Checkpoint path")->required();
  t->add_option("--metrics", tr.metrics, "Metrics log (JSON lines); default <out>.metrics.jsonl");
  t->add_option("--plan", tr.plan, "Schedule preset: desk or full");
  t->add_option("--config", tr.config, "JSON config file");
  t->add_option("--seed", tr.seed, "Curriculum seed");
  t->add_option("--stage1-epochs", tr.stage1_epochs);
  t->add_option("--stage2-epochs", tr.stage2_epochs);
  t->add_option("--batch-size", tr.batch_size, "Batch size for both stages");
  t->add_option("--val-limit", tr.val_limit, "Validate on the first N records");
  t->add_option("--checkpoint-every", tr.checkpoint_every, "Checkpoint interval in optimizer steps");
  t->add_option("--stop-after", tr.stop_after, "Pause after this many global steps");
  t->add_option("--resume", tr.resume, "Continue from a checkpoint");
  t->add_option("--embed-dim", tr.embed_dim);
  t->add_option("--heads", tr.heads);
  t->add_option("--blocks", tr.blocks, "Blocks per module (L1)");
  t->add_option("--modules", tr.modules, "Module count (L2)");
  t->add_option("--window", tr.window, "Window size P_w");
  t->add_option("--grid", tr.grid, "Padded grid ROWSxCOLS; default fits the data");
  t->add_flag("--deterministic", tr.deterministic, "Ordered reductions (always on; recorded in the manifest)");
  t->add_option("--threads", tr.threads, "Worker threads");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score a checkpoint and classical baselines");
  e->add_option("--checkpoint", ev.checkpoint, "Model checkpoint");
  e->add_option("--data", ev.data, "Evaluation dataset")->required();
  e->add_option("--out,-o", ev.out, "Text report path (JSON written to <out>.json)")->required();
  e->add_option("--tasks", ev.tasks, "Comma list such as TP:0.5,FP:0.75,CE:4");
  e->add_option("--plot-dir", ev.plot_dir, "Directory for CSV plot data");
  e->add_flag("--kappa-sweep", ev.kappa_sweep, "Add sensitivity tables for kappa in {1,2,4,8}");
  e->add_flag("--pred-equals-gt", ev.pred_equals_gt, "Debug: score the ground truth as every prediction");
  e->add_flag("--baselines-only", ev.baselines_only, "Skip the model column");
  e->add_option("--config", ev.config, "JSON config file");
  e->add_option("--seed", ev.seed, "Noise seed for resynthesized sensitivity samples");
  e->add_option("--threads", ev.threads, "Worker threads");

  std::uint64_t verify_seed = 1;
  bool inject = false;
  std::string verify_out;
  auto* v = app.add_subcommand("verify", "Run the identity and oracle checks");
  v->add_option("--seed", verify_seed);
  v->add_flag("--inject-fft-sign-fault", inject, "Flip the FFT exponent sign to exercise the checks");
  v->add_option("--out,-o", verify_out, "Also write the report here");

  TransformArgs tf;
  auto* x = app.add_subcommand("transform", "Dump DDA-domain views of one record");
  x->add_option("--data", tf.data, "Dataset file")->required();
  x->add_option("--record", tf.record, "Record index");
  x->add_option("--out,-o", tf.out, "Output prefix")->required();

  std::string manifest;
  auto* r = app.add_subcommand("replay", "Re-run a manifest and compare output digests");
  r->add_option("manifest", manifest, "Manifest JSON")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForVersion& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kExitUsage;
  }

  if (*g) return cmd_gen(gen, args);
  if (*t) return cmd_train(tr, args);
  if (*e) return cmd_eval(ev, args);
  if (*v) return cmd_verify(verify_seed, inject, verify_out, args);
  if (*x) return cmd_transform(tf, args);
  if (*r) return cmd_replay(manifest);
  return kExitUsage;
}

}  // namespace
}  // namespace ddafm::cli

int main(int argc, char** argv) {
  using namespace ddafm;
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return cli::run(args);
  } catch (const cli::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return cli::kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return cli::kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return cli::kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return cli::kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << " (last good state saved to the checkpoint path)\n";
    return cli::kExitNumeric;
  } catch (const std::domain_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return cli::kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
