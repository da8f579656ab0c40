// aseer: generate synthetic data, train, evaluate, time the decoder, plot.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 training divergence.

#include "aseer/aseer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace aseer;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ExperimentConfig load_config(const std::string& path) {
  return experiment_config_from_json(io::read_json(path));
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("NA"); }

int cmd_generate(const std::string& config_path, const std::string& out_dir) {
  const ExperimentConfig cfg = load_config(config_path);
  synth::GeneratedData g = synth::generate(cfg.scenario);
  for (const auto& w : g.warnings) std::cerr << "warning: " << w << '\n';
  const fs::path out = out_dir.empty() ? fs::path(cfg.data_dir) : fs::path(out_dir);
  io::export_bundle(io::DataBundle{std::move(g.dataset), std::move(g.locations), std::move(g.reachability)}, out);
  nlohmann::json scenario = cfg.scenario;
  io::write_json(scenario, out / "scenario.json");
  std::cout << "wrote " << cfg.scenario.sensors() << " sensors, " << cfg.scenario.days << " days to "
            << out.string() << '\n';
  return 0;
}

struct TrainOverrides {
  std::string data_dir, out_dir, kind;
  std::optional<int> xi, max_epochs;
  bool no_agdn = false, no_pte = false;
};

int cmd_train(const std::string& config_path, const TrainOverrides& o) {
  ExperimentConfig cfg = load_config(config_path);
  if (!o.data_dir.empty()) cfg.data_dir = o.data_dir;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (!o.kind.empty()) cfg.model.kind = o.kind;
  if (o.xi) cfg.model.xi = *o.xi;
  if (o.max_epochs) cfg.training.max_epochs = *o.max_epochs;
  cfg.model.no_agdn = cfg.model.no_agdn || o.no_agdn;
  cfg.model.no_pte = cfg.model.no_pte || o.no_pte;
  cfg.model = model_config_from_json(to_json(cfg.model));

  const io::DataBundle bundle = io::load_bundle(cfg.data_dir);
  PreparedData data = prepare(bundle, cfg.epsilon_km, cfg.windows);
  for (const auto* ws : {&data.train, &data.validation, &data.test})
    for (const auto& w : ws->warnings) std::cerr << "warning: " << w << '\n';

  auto model = make_model(cfg.model, data.graph, data.norm);
  std::cout << cfg.model.kind << ": " << model->parameters().scalar_count() << " parameters, "
            << data.train.instances.size() << " training windows, " << data.validation.instances.size()
            << " validation windows\n";
  const TrainResult r =
      train(*model, data.train.instances, data.validation.instances, cfg.training, [](const EpochRecord& e) {
        std::cout << "epoch " << e.epoch << " L_p=" << fmt(e.l_p) << " L_delta=" << fmt(e.l_delta)
                  << " L_f=" << fmt(e.l_f) << " val=" << fmt(e.val_total) << std::endl;
      });

  const fs::path out(cfg.out_dir);
  make_dir(out);
  save_checkpoint(*model, out / "checkpoint.json");
  io::write_json(io::norm_to_json(data.norm), out / "norm.json");
  write_history_csv(r.history, out / "history.csv");
  std::cout << "best epoch " << r.best_epoch << " val=" << fmt(r.best_val) << "; wrote " << out.string() << '\n';
  return 0;
}

struct EvalOptions {
  std::string checkpoint, data_dir, out_dir, model = "aseer";
  double epsilon_km = 1.0;
  WindowParams windows;
};

void write_metrics_csv(const fs::path& path, const std::string& name, const Evaluation& ev) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "model";
  for (const auto& n : MetricReport::names()) out << ',' << n;
  out << ",latency_ms\n" << name;
  for (const auto& v : ev.metrics.values()) out << ',' << fmt(v);
  out << ',' << fmt(ev.mean_ms) << '\n';
}

void write_forecasts_csv(const fs::path& path, const Dataset& ds, const std::vector<ForecastInstance>& windows,
                         Forecaster& f) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(10);
  out << "anchor,sensor_id,slot_index,begin,length,flow,elapsed\n";
  for (const auto& inst : windows)
    for (const auto& sf : f.forecast(inst))
      for (std::size_t k = 0; k < sf.slots.size(); ++k) {
        const auto& s = sf.slots[k];
        out << inst.anchor << ',' << ds.series[sf.sensor].sensor_id << ',' << k << ',' << s.begin << ','
            << s.length << ',' << s.flow << ',' << s.elapsed << '\n';
      }
}

int cmd_eval(const EvalOptions& o) {
  const io::DataBundle bundle = io::load_bundle(o.data_dir);
  std::unique_ptr<SequenceModel> model;
  std::unique_ptr<Forecaster> forecaster;
  double epsilon = o.epsilon_km;
  nlohmann::json ckpt;
  if (!o.checkpoint.empty()) {
    ckpt = io::read_json(o.checkpoint);
    epsilon = checkpoint_epsilon(ckpt);
  }
  PreparedData data = prepare(bundle, epsilon, o.windows);
  if (!o.checkpoint.empty()) {
    model = model_from_checkpoint(ckpt, data.graph);
    forecaster = std::make_unique<ModelForecaster>(*model);
  } else if (o.model == "last") {
    forecaster = std::make_unique<LastForecaster>();
  } else if (o.model == "ha") {
    forecaster = std::make_unique<HistoricalAverageForecaster>();
  } else if (o.model == "oracle") {
    forecaster = std::make_unique<OracleForecaster>();
  } else {
    throw UsageError("eval needs --checkpoint or --model last|ha|oracle");
  }
  for (const auto& w : data.test.warnings) std::cerr << "warning: " << w << '\n';
  if (data.test.instances.empty()) throw DataError("no test windows");

  const Evaluation ev = evaluate(*forecaster, data.test.instances);
  const fs::path out(o.out_dir);
  make_dir(out);
  write_metrics_csv(out / "metrics.csv", forecaster->name(), ev);
  write_forecasts_csv(out / "forecasts.csv", bundle.dataset, data.test.instances, *forecaster);
  std::ostringstream summary;
  summary << forecaster->name() << " on " << data.test.instances.size() << " test windows ("
          << ev.metrics.masked_slots << " scored cycles)\n";
  const auto names = MetricReport::names();
  const auto values = ev.metrics.values();
  for (std::size_t k = 0; k < names.size(); ++k) summary << "  " << names[k] << ": " << fmt(values[k]) << '\n';
  summary << "  latency: " << fmt(ev.mean_ms) << " ms per window\n";
  std::ofstream(out / "summary.txt") << summary.str();
  std::cout << summary.str();
  return 0;
}

template <class T>
std::vector<T> parse_list(const std::string& s) {
  std::vector<T> out;
  for (auto part : io::split_csv_line(s)) {
    if (part.empty()) continue;
    out.push_back(io::parse_number<T>(part, "list '" + s + "'"));
  }
  if (out.empty()) throw UsageError("empty list '" + s + "'");
  return out;
}

int cmd_latency(const std::string& checkpoint, const std::string& xis, const std::string& hours, int repeats,
                const std::string& out_path) {
  const nlohmann::json j = io::read_json(checkpoint);
  LatencyConfig cfg;
  try {
    const ModelConfig mc = model_config_from_json(j.at("model"));
    cfg.width = mc.width;
    cfg.d_phi = mc.d_phi;
    cfg.time_scale = mc.time_scale;
    cfg.norm = io::norm_from_json(j.at("norm"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
  cfg.repeats = repeats;
  std::vector<int> xi_list;
  try {
    xi_list = parse_list<int>(xis);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  for (int x : xi_list)
    if (x < 1) throw UsageError("step sizes must be >= 1");
  const auto rows = measure_latency(cfg, xi_list, parse_list<double>(hours));
  std::ofstream out(out_path);
  if (!out) throw DataError("cannot write " + out_path);
  out << "xi,hours,ms\n";
  for (const auto& r : rows) {
    out << r.xi << ',' << fmt(r.hours) << ',' << fmt(r.ms) << '\n';
    std::cout << "xi=" << r.xi << " hours=" << fmt(r.hours) << " ms=" << fmt(r.ms) << " invocations=" << r.calls
              << " slots=" << r.slots << '\n';
  }
  return 0;
}

// Grouped bar chart: one group per metric, one bar per model.
int cmd_report(const std::vector<std::string>& files, const std::string& out_path) {
  std::vector<std::string> models;
  std::vector<std::vector<double>> values;  // [model][metric], NaN when absent
  const auto& names = MetricReport::names();
  std::string header = "model";
  for (const auto& n : names) header += "," + n;
  header += ",latency_ms";
  for (const auto& f : files) {
    io::read_csv(f, header, [&](const auto& c, const std::string& ctx) {
      models.emplace_back(c[0]);
      std::vector<double> row;
      for (std::size_t k = 1; k <= names.size(); ++k)
        row.push_back(c[k] == "NA" ? std::nan("") : io::parse_number<double>(c[k], ctx));
      values.push_back(row);
    });
  }
  if (models.empty()) throw DataError("no metric rows to plot");

  const double panel_w = 180, panel_h = 200, top = 40, left = 20;
  const double width = left * 2 + panel_w * static_cast<double>(names.size());
  const double height = top + panel_h + 40 + 20 * static_cast<double>(models.size());
  const char* palette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948"};
  std::ofstream out(out_path);
  if (!out) throw DataError("cannot write " + out_path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t m = 0; m < names.size(); ++m) {
    double vmax = 0.0;
    for (const auto& row : values)
      if (!std::isnan(row[m])) vmax = std::max(vmax, row[m]);
    const double x0 = left + panel_w * static_cast<double>(m);
    const double bar_w = (panel_w - 30) / static_cast<double>(models.size());
    out << "<text x=\"" << x0 + panel_w / 2 << "\" y=\"20\" text-anchor=\"middle\">" << names[m] << "</text>\n";
    out << "<line x1=\"" << x0 + 10 << "\" y1=\"" << top + panel_h << "\" x2=\"" << x0 + panel_w - 10 << "\" y2=\""
        << top + panel_h << "\" stroke=\"black\"/>\n";
    for (std::size_t k = 0; k < models.size(); ++k) {
      const double v = values[k][m];
      if (std::isnan(v)) continue;
      const double h = vmax > 0 ? panel_h * v / vmax : 0.0;
      const double x = x0 + 15 + bar_w * static_cast<double>(k);
      out << "<rect x=\"" << x << "\" y=\"" << top + panel_h - h << "\" width=\"" << bar_w * 0.8 << "\" height=\""
          << h << "\" fill=\"" << palette[k % 6] << "\"/>\n";
      out << "<text x=\"" << x + bar_w * 0.4 << "\" y=\"" << top + panel_h - h - 3
          << "\" text-anchor=\"middle\" font-size=\"9\">" << fmt(v) << "</text>\n";
    }
  }
  for (std::size_t k = 0; k < models.size(); ++k) {
    const double y = top + panel_h + 30 + 20 * static_cast<double>(k);
    out << "<rect x=\"" << left << "\" y=\"" << y - 10 << "\" width=\"12\" height=\"12\" fill=\"" << palette[k % 6]
        << "\"/><text x=\"" << left + 18 << "\" y=\"" << y << "\">" << models[k] << "</text>\n";
  }
  out << "</svg>\n";
  std::cout << "wrote " << out_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Irregular traffic time-series forecasting"};
  app.require_subcommand(1);

  std::string config, out, data, checkpoint;
  auto* gen = app.add_subcommand("generate", "Simulate a synthetic scenario");
  gen->add_option("--config", config, "Experiment config (JSON)")->required();
  gen->add_option("--out", out, "Output dataset directory (default: config data_dir)");

  TrainOverrides tr;
  auto* trn = app.add_subcommand("train", "Train a model");
  trn->add_option("--config", config, "Experiment config (JSON)")->required();
  trn->add_option("--data", tr.data_dir, "Dataset directory (overrides config)");
  trn->add_option("--out", tr.out_dir, "Run directory (overrides config)");
  trn->add_option("--model", tr.kind, "aseer or recurrent");
  trn->add_option("--xi", tr.xi, "Prediction step size");
  trn->add_option("--max-epochs", tr.max_epochs, "Epoch cap");
  trn->add_flag("--no-agdn", tr.no_agdn, "Ablation: drop the graph diffusion module");
  trn->add_flag("--no-pte", tr.no_pte, "Ablation: generic time encoding only");

  EvalOptions ev;
  auto* evl = app.add_subcommand("eval", "Evaluate on the test split");
  evl->add_option("--checkpoint", ev.checkpoint, "Trained checkpoint");
  evl->add_option("--model", ev.model, "Baseline when no checkpoint is given: last, ha or oracle");
  evl->add_option("--data", ev.data_dir, "Dataset directory")->required();
  evl->add_option("--out", ev.out_dir, "Output directory")->required();
  evl->add_option("--epsilon-km", ev.epsilon_km, "Graph threshold for baselines");
  evl->add_option("--history", ev.windows.history_len, "History window (s)");
  evl->add_option("--horizon", ev.windows.horizon, "Forecast horizon (s)");
  evl->add_option("--stride", ev.windows.stride, "Window stride (s)");

  std::string xis = "1,6,12,24,48", hours = "1,4,24";
  int repeats = 5;
  auto* lat = app.add_subcommand("latency", "Time the decoder across step sizes");
  lat->add_option("--checkpoint", checkpoint, "Trained checkpoint (dimensions and statistics)")->required();
  lat->add_option("--xi", xis, "Comma-separated step sizes");
  lat->add_option("--hours", hours, "Comma-separated horizons in hours");
  lat->add_option("--repeats", repeats, "Forecasts timed per setting");
  lat->add_option("--out", out, "CSV output")->required();

  std::vector<std::string> metric_files;
  auto* rep = app.add_subcommand("report", "Plot metric bars from eval outputs");
  rep->add_option("--metrics", metric_files, "metrics.csv files")->required();
  rep->add_option("--out", out, "SVG output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_generate(config, out);
    if (trn->parsed()) return cmd_train(config, tr);
    if (evl->parsed()) return cmd_eval(ev);
    if (lat->parsed()) return cmd_latency(checkpoint, xis, hours, repeats, out);
    if (rep->parsed()) return cmd_report(metric_files, out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DivergenceError& e) {
    std::cerr << "error: training diverged: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
