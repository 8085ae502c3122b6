#include "genad/cli.hpp"

#include <glob.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "genad/data/csv.hpp"
#include "genad/data/synthetic.hpp"
#include "genad/detect/pipeline.hpp"
#include "genad/errors.hpp"
#include "genad/io.hpp"
#include "genad/model/verify.hpp"
#include "genad/train/trainer.hpp"

namespace genad::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr double kGradcheckTolerance = 1e-4;

class UsageError : public Error {
 public:
  using Error::Error;
};

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> argv;
};

struct RunConfig {
  model::ModelConfig model;
  train::TrainConfig train;
  double a_r = 0.01;
  std::size_t bins = detect::kDefaultBins;
  bool model_n_metrics_set = false;
};

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

std::string file_checksum(const fs::path& path) { return hex32(io::crc32(io::read_file(path))); }

json read_json_file(const fs::path& path) {
  const std::string text = io::read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw UsageError(path.string() + ": invalid JSON: " + e.what());
  }
}

RunConfig load_run_config(const Globals& g) {
  RunConfig rc;
  if (g.config_path.empty()) return rc;
  const json doc = read_json_file(g.config_path);
  if (!doc.is_object()) throw UsageError(g.config_path + ": config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key == "model") {
      rc.model = model::model_config_from_json(value, rc.model);
      rc.model_n_metrics_set = value.contains("n_metrics");
    } else if (key == "train") {
      rc.train = train::train_config_from_json(value, rc.train);
    } else if (key == "detect") {
      for (const auto& [k, v] : value.items()) {
        if (k == "a_r") rc.a_r = v.get<double>();
        else if (k == "bins") rc.bins = v.get<std::size_t>();
        else throw UsageError(g.config_path + ": unknown key 'detect." + k + "'");
      }
    } else {
      throw UsageError(g.config_path + ": unknown key '" + key + "'");
    }
  }
  return rc;
}

json run_config_json(const RunConfig& rc) {
  return {{"model", model::to_json(rc.model)},
          {"train", train::to_json(rc.train)},
          {"detect", {{"a_r", rc.a_r}, {"bins", rc.bins}}}};
}

std::vector<fs::path> expand_glob(const std::string& pattern) {
  glob_t g{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  std::vector<fs::path> out;
  if (rc == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) {
      const std::string p = g.gl_pathv[i];
      if (!p.ends_with(".labels.csv")) out.emplace_back(p);
    }
  }
  ::globfree(&g);
  if (out.empty()) throw DataError("no files match '" + pattern + "'");
  return out;
}

fs::path require_out_dir(const Globals& g) {
  if (g.out_dir.empty()) throw UsageError("--out is required");
  fs::create_directories(g.out_dir);
  return g.out_dir;
}

// Records a command's inputs, effective config and outputs next to its artifacts.
class Manifest {
 public:
  Manifest(std::string command, const Globals& g)
      : start_(std::chrono::steady_clock::now()), doc_{{"command", std::move(command)}, {"argv", g.argv}} {
    doc_["inputs"] = json::array();
    doc_["outputs"] = json::array();
    doc_["seeds"] = json::object();
    doc_["tool_version"] = "0.1.0";
  }

  void config(json c) { doc_["config"] = std::move(c); }
  void seed(const std::string& name, std::uint64_t value) { doc_["seeds"][name] = value; }
  void set(const std::string& key, json value) { doc_[key] = std::move(value); }
  void input(const fs::path& p) { doc_["inputs"].push_back({{"path", p.string()}, {"crc32", file_checksum(p)}}); }
  void output(const fs::path& p) { doc_["outputs"].push_back({{"path", p.string()}, {"crc32", file_checksum(p)}}); }

  void write(const fs::path& dir) {
    doc_["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    io::atomic_write(dir / "manifest.json", doc_.dump(2) + "\n");
  }

 private:
  std::chrono::steady_clock::time_point start_;
  json doc_;
};

void write_loss_csv(const fs::path& path, const std::vector<train::LossPoint>& points, const char* column) {
  std::ostringstream out;
  out << "step," << column << "\n";
  for (const auto& p : points) out << p.step << ',' << io::format_double(p.loss) << '\n';
  io::atomic_write(path, out.str());
}

void check_same_schema(const std::vector<data::SeriesFrame>& frames, const std::vector<fs::path>& paths) {
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].metric_names != frames[0].metric_names) {
      throw DataError("schema mismatch: " + paths[i].string() + " has different metrics than " + paths[0].string());
    }
  }
}

void apply_train_overrides(RunConfig& rc, const Globals& g, std::optional<std::uint64_t> steps,
                           std::optional<std::size_t> batch, std::optional<double> lr) {
  if (g.seed) {
    rc.train.seed = *g.seed;
    rc.model.seed = *g.seed;
  }
  if (steps) rc.train.steps = *steps;
  if (batch) rc.train.batch_size = *batch;
  if (lr) rc.train.lr = *lr;
  train::validate(rc.train);
}

void fit_model_to_data(RunConfig& rc, std::size_t n_metrics) {
  if (rc.model_n_metrics_set && rc.model.n_metrics != n_metrics) {
    throw DataError("config says n_metrics = " + std::to_string(rc.model.n_metrics) + " but the data has " +
                    std::to_string(n_metrics) + " metrics");
  }
  rc.model.n_metrics = n_metrics;
  model::validate(rc.model);
}

train::LogCallback progress(std::ostream& err) {
  return [&err](const train::LossPoint& p) { err << "step " << p.step << " loss " << p.loss << "\n"; };
}

int cmd_synth(const Globals& g, const std::string& spec_path) {
  const fs::path out = require_out_dir(g);
  Manifest manifest("synth", g);
  data::SyntheticSpec spec;
  if (!spec_path.empty()) {
    spec = data::load_spec(spec_path);
    manifest.input(spec_path);
  }
  if (g.seed) spec.seed = *g.seed;
  data::validate_spec(spec);
  manifest.config(data::spec_to_json(spec));
  manifest.seed("spec", spec.seed);

  const std::vector<data::SeriesFrame> fleet = data::generate_fleet(spec);
  json recipes = {{"spec", data::spec_to_json(spec)}, {"entities", json::array()}};
  for (std::size_t e = 0; e < fleet.size(); ++e) {
    char name[32];
    std::snprintf(name, sizeof name, "entity_%02zu.csv", e);
    const fs::path path = out / name;
    data::save_csv(fleet[e], path);
    manifest.output(path);
    if (fleet[e].labels) manifest.output(data::sibling_label_path(path));
    recipes["entities"].push_back({{"file", name}, {"metadata", fleet[e].metadata}});
  }
  io::atomic_write(out / "recipes.json", recipes.dump(2) + "\n");
  manifest.output(out / "recipes.json");
  manifest.write(out);
  return kOk;
}

int cmd_pretrain(const Globals& g, const std::string& pattern, std::optional<std::uint64_t> steps,
                 std::optional<std::size_t> batch, std::optional<double> lr, std::ostream& err) {
  RunConfig rc = load_run_config(g);
  apply_train_overrides(rc, g, steps, batch, lr);
  const fs::path out = require_out_dir(g);
  Manifest manifest("pretrain", g);
  if (!g.config_path.empty()) manifest.input(g.config_path);

  const std::vector<fs::path> paths = expand_glob(pattern);
  std::vector<data::SeriesFrame> fleet;
  for (const auto& p : paths) {
    fleet.push_back(data::load_csv(p));
    manifest.input(p);
  }
  check_same_schema(fleet, paths);
  fit_model_to_data(rc, fleet[0].n_metrics());
  manifest.config(run_config_json(rc));
  manifest.seed("train", rc.train.seed);
  manifest.seed("model", rc.model.seed);

  train::TrainResult result = train::pretrain(fleet, rc.train, rc.model, progress(err));
  result.checkpoint.info["sources"] = json::array();
  for (const auto& p : paths) result.checkpoint.info["sources"].push_back(p.filename().string());
  train::save_checkpoint(result.checkpoint, out / "model.ckpt");
  write_loss_csv(out / "loss.csv", result.running_loss, "running_loss");
  manifest.output(out / "model.ckpt");
  manifest.output(out / "loss.csv");
  manifest.set("steps", result.checkpoint.step);
  manifest.write(out);
  return kOk;
}

int cmd_finetune(const Globals& g, const std::string& base_path, const std::string& data_path, bool scratch,
                 std::optional<std::uint64_t> steps, std::optional<std::size_t> batch, std::optional<double> lr,
                 std::ostream& err) {
  RunConfig rc = load_run_config(g);
  apply_train_overrides(rc, g, steps, batch, lr);
  if (base_path.empty() && !scratch) throw UsageError("--base is required unless --scratch is given");
  const fs::path out = require_out_dir(g);
  Manifest manifest(scratch ? "finetune --scratch" : "finetune", g);
  if (!g.config_path.empty()) manifest.input(g.config_path);

  std::optional<train::Checkpoint> base;
  if (!base_path.empty()) {
    base = train::load_checkpoint(base_path);
    manifest.input(base_path);
  }
  const data::SeriesFrame frame = data::load_csv(data_path);
  manifest.input(data_path);
  if (base && frame.n_metrics() != base->model.config().n_metrics) {
    throw DataError("entity has " + std::to_string(frame.n_metrics()) + " metrics, base checkpoint expects " +
                    std::to_string(base->model.config().n_metrics));
  }
  if (base && !base->metric_names.empty() && frame.metric_names != base->metric_names) {
    throw DataError("entity metric names differ from the base checkpoint");
  }

  train::TrainResult result = [&] {
    if (!scratch) return train::finetune(*base, frame, rc.train, progress(err));
    if (base) {
      rc.model = base->model.config();
      if (g.seed) rc.model.seed = *g.seed;
    } else {
      fit_model_to_data(rc, frame.n_metrics());
    }
    return train::train_scratch(frame, rc.train, rc.model, progress(err));
  }();
  manifest.config(json{{"model", model::to_json(result.checkpoint.model.config())}, {"train", train::to_json(rc.train)}});
  manifest.seed("train", rc.train.seed);
  manifest.seed("model", result.checkpoint.model.config().seed);

  train::save_checkpoint(result.checkpoint, out / "model.ckpt");
  write_loss_csv(out / "loss.csv", result.running_loss, "running_loss");
  write_loss_csv(out / "validation.csv", result.validation_loss, "validation_loss");
  manifest.output(out / "model.ckpt");
  manifest.output(out / "loss.csv");
  manifest.output(out / "validation.csv");
  manifest.set("steps", result.checkpoint.step);
  manifest.write(out);
  return kOk;
}

int cmd_detect(const Globals& g, const std::string& ckpt_path, const std::string& data_path,
               std::optional<double> a_r_flag, std::ostream& out_stream) {
  RunConfig rc = load_run_config(g);
  const double a_r = a_r_flag.value_or(rc.a_r);
  if (!(a_r > 0.0 && a_r < 1.0)) throw UsageError("--a-r must lie in (0, 1)");
  const fs::path out = require_out_dir(g);
  Manifest manifest("detect", g);
  if (!g.config_path.empty()) manifest.input(g.config_path);
  const train::Checkpoint ckpt = train::load_checkpoint(ckpt_path);
  manifest.input(ckpt_path);
  const data::SeriesFrame frame = data::load_csv(data_path);
  manifest.input(data_path);
  if (frame.n_metrics() != ckpt.model.config().n_metrics) {
    throw DataError("entity has " + std::to_string(frame.n_metrics()) + " metrics, checkpoint expects " +
                    std::to_string(ckpt.model.config().n_metrics));
  }

  detect::PipelineOptions options = detect::options_from_checkpoint(ckpt);
  options.bins = rc.bins;
  manifest.config({{"a_r", a_r},
                   {"bins", options.bins},
                   {"train_fraction", options.train_fraction},
                   {"validation_fraction", options.validation_fraction}});
  const detect::PipelineResult result = detect::run_detection(frame, ckpt, a_r, options);
  detect::write_scores_csv(out / "scores.csv", result);
  json report = detect::report_json(result);
  report["entity"] = fs::path(data_path).stem().string();
  io::atomic_write(out / "report.json", report.dump(2) + "\n");
  manifest.output(out / "scores.csv");
  manifest.output(out / "report.json");
  manifest.write(out);
  if (result.report) {
    out_stream << "precision " << result.report->precision << " recall " << result.report->recall << " f1 "
               << result.report->f1 << "\n";
  }
  return kOk;
}

int cmd_eval(const Globals& g, const std::string& pattern, std::ostream& out_stream) {
  const fs::path out = require_out_dir(g);
  Manifest manifest("eval", g);
  std::vector<fs::path> paths;
  {
    glob_t gl{};
    if (::glob(pattern.c_str(), 0, nullptr, &gl) == 0) {
      for (std::size_t i = 0; i < gl.gl_pathc; ++i) paths.emplace_back(gl.gl_pathv[i]);
    }
    ::globfree(&gl);
  }
  if (paths.empty()) throw DataError("no reports match '" + pattern + "'");

  std::ostringstream csv;
  csv << "entity,Pre,Rec,F1\n";
  double sum_p = 0.0;
  double sum_r = 0.0;
  for (const auto& p : paths) {
    const json report = read_json_file(p);
    if (!report.contains("precision") || !report.contains("recall")) {
      throw DataError(p.string() + ": report has no precision/recall (entity was unlabelled)");
    }
    const double prec = report.at("precision").get<double>();
    const double rec = report.at("recall").get<double>();
    const double f1 = detect::f1_score(prec, rec);
    std::string name = report.value("entity", std::string());
    if (name.empty()) name = p.parent_path().filename().string();
    csv << name << ',' << io::format_double(prec) << ',' << io::format_double(rec) << ',' << io::format_double(f1)
        << '\n';
    sum_p += prec;
    sum_r += rec;
    manifest.input(p);
  }
  const double n = static_cast<double>(paths.size());
  const double mean_p = sum_p / n;
  const double mean_r = sum_r / n;
  const double total_f1 = detect::f1_score(mean_p, mean_r);
  csv << "Total," << io::format_double(mean_p) << ',' << io::format_double(mean_r) << ','
      << io::format_double(total_f1) << '\n';
  io::atomic_write(out / "eval.csv", csv.str());
  manifest.output(out / "eval.csv");
  manifest.write(out);

  char line[128];
  std::snprintf(line, sizeof line, "Total  Pre %.3f  Rec %.3f  F1 %.3f\n", mean_p, mean_r, total_f1);
  out_stream << line;
  return kOk;
}

int cmd_gradcheck(const Globals& g, double corrupt, std::ostream& out_stream) {
  model::ModelConfig mc;
  if (!g.config_path.empty()) mc = load_run_config(g).model;
  numerics::GradCheckOptions options;
  options.seed = g.seed.value_or(0);
  options.corrupt_gradient = corrupt;
  const auto entries = model::run_gradcheck_suite(options.seed, mc, options);
  double worst = 0.0;
  for (const auto& e : entries) {
    char line[160];
    std::snprintf(line, sizeof line, "%-26s checked %5zu  max rel err %.3e\n", e.name.c_str(), e.result.checked,
                  e.result.max_relative_error);
    out_stream << line;
    worst = std::max(worst, e.result.max_relative_error);
  }
  const bool pass = worst < kGradcheckTolerance;
  char line[96];
  std::snprintf(line, sizeof line, "max relative error %.3e: %s\n", worst, pass ? "PASS" : "FAIL");
  out_stream << line;
  return pass ? kOk : kNumericFailure;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"GenAD: masked-reconstruction anomaly detection for multivariate time series", "genad"};
  app.require_subcommand(1);
  Globals g;
  g.argv.assign(args.begin(), args.end());
  app.add_option("--seed", g.seed, "Seed for data generation, initialization and training");
  app.add_option("--config", g.config_path, "JSON config with model/train/detect sections");
  app.add_option("--out", g.out_dir, "Output directory");

  std::optional<std::uint64_t> steps;
  std::optional<std::size_t> batch;
  std::optional<double> lr;
  auto add_train_flags = [&](CLI::App* sub) {
    sub->add_option("--steps", steps, "Training steps");
    sub->add_option("--batch-size", batch, "Windows per step");
    sub->add_option("--lr", lr, "Adam learning rate");
  };

  std::string spec_path;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic fleet with labelled anomalies");
  synth->add_option("--spec", spec_path, "SyntheticSpec JSON (defaults when omitted)");

  std::string data_glob;
  auto* pretrain = app.add_subcommand("pretrain", "Pre-train on a fleet of entity CSVs");
  pretrain->add_option("--data", data_glob, "Glob of entity CSVs")->required();
  add_train_flags(pretrain);

  std::string base_path;
  std::string data_path;
  bool scratch = false;
  auto* finetune = app.add_subcommand("finetune", "Fine-tune a checkpoint on one entity");
  finetune->add_option("--base", base_path, "Base checkpoint");
  finetune->add_option("--data", data_path, "Entity CSV")->required();
  finetune->add_flag("--scratch", scratch, "Train from a fresh initialization instead of the base weights");
  add_train_flags(finetune);

  std::string ckpt_path;
  std::string detect_data;
  std::optional<double> a_r;
  auto* detect_cmd = app.add_subcommand("detect", "Score, threshold and evaluate one entity");
  detect_cmd->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  detect_cmd->add_option("--data", detect_data, "Entity CSV")->required();
  detect_cmd->add_option("--a-r", a_r, "Expected anomaly rate in (0, 1)");

  std::string report_glob;
  auto* eval = app.add_subcommand("eval", "Aggregate detection reports");
  eval->add_option("--reports", report_glob, "Glob of report.json files")->required();

  double corrupt = 0.0;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  gradcheck->add_option("--corrupt-grad", corrupt)->group("");

  for (auto* sub : {synth, pretrain, finetune, detect_cmd, eval, gradcheck}) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kBadArguments;
  }

  try {
    if (*synth) return cmd_synth(g, spec_path);
    if (*pretrain) return cmd_pretrain(g, data_glob, steps, batch, lr, err);
    if (*finetune) return cmd_finetune(g, base_path, data_path, scratch, steps, batch, lr, err);
    if (*detect_cmd) return cmd_detect(g, ckpt_path, detect_data, a_r, out);
    if (*eval) return cmd_eval(g, report_glob, out);
    if (*gradcheck) return cmd_gradcheck(g, corrupt, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kBadArguments;
  } catch (const SpecError& e) {
    err << "error: " << e.what() << "\n";
    return kBadArguments;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << "\n";
    return kBadArguments;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const PlanError& e) {
    err << "error: " << e.what() << "\n";
    return kBadArguments;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kNumericFailure;
  }
  return kBadArguments;
}

}  // namespace genad::cli
