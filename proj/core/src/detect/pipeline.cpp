#include "genad/detect/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "genad/errors.hpp"
#include "genad/io.hpp"

namespace genad::detect {

PipelineOptions options_from_checkpoint(const train::Checkpoint& ckpt) {
  PipelineOptions o;
  if (ckpt.info.contains("train_config")) {
    const auto& tc = ckpt.info["train_config"];
    o.train_fraction = tc.value("train_fraction", o.train_fraction);
    o.validation_fraction = tc.value("validation_fraction", o.validation_fraction);
  }
  return o;
}

PipelineResult run_detection(const data::SeriesFrame& frame, const train::Checkpoint& ckpt, double a_r,
                             const PipelineOptions& options) {
  if (!(a_r > 0.0 && a_r < 1.0)) throw ContractError("a_r must lie in (0, 1)");
  frame.validate();
  const double length = static_cast<double>(frame.length());
  const auto train_end = static_cast<std::size_t>(std::floor(options.train_fraction * length));
  const auto fit_end =
      train_end - static_cast<std::size_t>(std::floor(options.validation_fraction * static_cast<double>(train_end)));

  PipelineResult r;
  r.errors = score(frame, ckpt);
  const std::size_t offset = r.errors.offset;
  const ErrorSeries validation = r.errors.slice(fit_end, train_end);
  if (validation.length() == 0) {
    throw ContractError("validation slice is empty: scoring starts at point " + std::to_string(offset) +
                        ", validation is [" + std::to_string(fit_end) + ", " + std::to_string(train_end) + ")");
  }
  std::optional<std::span<const std::uint8_t>> labels;
  if (frame.labels) labels = std::span<const std::uint8_t>(*frame.labels).subspan(validation.offset, validation.length());
  const std::vector<double> grid = default_eta_grid();
  r.threshold = calibrate(validation, labels, a_r, grid, options.bins);
  r.detection = detect_two_level(r.errors, r.threshold);
  r.validation_begin = validation.offset - offset;
  r.test_begin = std::max(train_end, offset) - offset;
  if (frame.labels && r.test_begin < r.errors.length()) {
    std::span<const std::uint8_t> pred(r.detection.entity);
    std::span<const std::uint8_t> truth(*frame.labels);
    r.report = evaluate(pred.subspan(r.test_begin), truth.subspan(offset + r.test_begin));
  }
  return r;
}

void write_scores_csv(const std::filesystem::path& path, const PipelineResult& r) {
  std::ostringstream out;
  out << "timestamp";
  for (const auto& name : r.errors.metric_names) out << ',' << name << "_err";
  out << ",entity_count,entity_flag\n";
  for (std::size_t t = 0; t < r.errors.length(); ++t) {
    out << r.errors.timestamps[t];
    for (std::size_t i = 0; i < r.errors.n_metrics(); ++i) out << ',' << io::format_double(r.errors.errors(i, t));
    out << ',' << r.detection.anomalous_count[t] << ',' << static_cast<int>(r.detection.entity[t]) << '\n';
  }
  io::atomic_write(path, out.str());
}

nlohmann::json report_json(const PipelineResult& r) {
  const ThresholdModel& th = r.threshold;
  nlohmann::json doc = {
      {"a_r", th.a_r},
      {"eta", th.eta},
      {"gate_entity", th.gate_entity},
      {"gates", th.gates},
      {"metric_names", r.errors.metric_names},
      {"bin_width", nlohmann::json::array()},
      {"scored_points", r.errors.length()},
      {"test_points", r.errors.length() - r.test_begin},
  };
  for (const auto& h : th.histograms) doc["bin_width"].push_back(h.delta);
  std::size_t flagged = 0;
  for (std::size_t t = r.test_begin; t < r.detection.entity.size(); ++t) flagged += r.detection.entity[t];
  doc["test_flagged"] = flagged;
  doc["entity_flags"] = r.detection.entity;
  if (th.validation_f1) doc["validation_f1"] = *th.validation_f1;
  if (r.report) {
    const EvalReport& e = *r.report;
    doc["tp"] = e.tp;
    doc["fp"] = e.fp;
    doc["fn"] = e.fn;
    doc["precision"] = e.precision;
    doc["recall"] = e.recall;
    doc["f1"] = e.f1;
    doc["segments"] = nlohmann::json::array();
    const auto& ts = r.errors.timestamps;
    for (const Segment& s : e.segments) {
      doc["segments"].push_back({{"start", ts[r.test_begin + s.begin]},
                                 {"end", ts[r.test_begin + s.end - 1]},
                                 {"detected", s.detected}});
    }
  }
  return doc;
}

}  // namespace genad::detect
