#include "cli.hpp"

#include <CLI11.hpp>

#include <deque>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "vitalws/config.hpp"
#include "vitalws/error.hpp"

namespace vitalws::cli {

namespace {

using nlohmann::json;

// A command-line flag that overrides one config key when given.
struct Binding {
  CLI::Option* option = nullptr;
  std::string key;
  std::string value;
  std::function<std::string(const std::string&)> convert;
};

struct Invocation {
  std::string config_path;
  std::vector<std::string> sets;
  std::deque<Binding> bindings;
};

void add_config_flags(CLI::App* sub, Invocation& inv) {
  sub->add_option("--config", inv.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  sub->add_option("--set", inv.sets, "Override a config key, e.g. --set forest.trees=200 (repeatable)");
}

CLI::Option* bind(CLI::App* sub, Invocation& inv, const std::string& flag, const std::string& key,
                  const std::string& help, std::function<std::string(const std::string&)> convert = {}) {
  auto& b = inv.bindings.emplace_back();
  b.key = key;
  b.convert = std::move(convert);
  b.option = sub->add_option(flag, b.value, help + " (config key " + key + ")");
  return b.option;
}

std::string comma_list_to_json(const std::string& text) {
  json arr = json::array();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) arr.push_back(item);
  }
  return arr.dump();
}

// Config file, then --set overrides, then dedicated flags; later wins.
ExperimentConfig assemble(const Invocation& inv) {
  json j = json::object();
  if (!inv.config_path.empty()) j = load_config(inv.config_path);
  for (const auto& s : inv.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(ErrorCode::kConfig, "--set expects KEY=VALUE", s);
    apply_override(j, s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& b : inv.bindings) {
    if (b.option->count() == 0) continue;
    apply_override(j, b.key, b.convert ? b.convert(b.value) : b.value);
  }
  auto config = j.get<ExperimentConfig>();
  config.resolve_seed();
  return config;
}

std::string key_listing() {
  std::string text = "Config keys and defaults (set in --config or with --set KEY=VALUE):\n";
  for (const auto& [key, value] : config_key_defaults()) text += "  " + key + " = " + value + "\n";
  return text;
}

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

void write_or_print(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot write file", path);
  f << text;
  if (!f) throw Error(ErrorCode::kIo, "write failed", path);
}

const std::string& require_data_dir(const ExperimentConfig& config) {
  if (config.data_dir.empty()) throw Error(ErrorCode::kConfig, "no input cohort: pass --data or set data_dir");
  return config.data_dir;
}

// ---- subcommands ----

void run_synth(const ExperimentConfig& config, std::ostream& out) {
  config.validate();
  if (config.data_dir.empty()) throw Error(ErrorCode::kConfig, "synth needs --out or data_dir");
  const auto cohort = generate_cohort(config.synth.spec(*config.seed, config.workers));
  const auto manifests = write_cohort(cohort, config.data_dir);
  std::size_t artifacts = 0;
  for (const auto& p : cohort.plants) artifacts += static_cast<std::size_t>(p.y);
  out << "wrote " << manifests.size() << " patients, " << cohort.plants.size() << " planted alerts (" << artifacts
      << " artifact) to " << config.data_dir << "\n";
}

void run_detect(const ExperimentConfig& config, const std::string& out_path, std::ostream& out) {
  config.criteria.validate();
  const auto cohort = load_cohort(require_data_dir(config));
  std::vector<AlertWindow> windows;
  for (const auto tau : config.taus) {
    for (const auto& record : cohort.records) {
      std::vector<AlertEvent> events;
      try {
        events = detect_alert_events(record, tau, config.criteria);
      } catch (const Error& e) {
        throw Error(e.code(), e.what(), "patient " + record.patient_id);
      }
      attach_labels(events, cohort.labels);
      for (auto& w : windows_from_events(events)) windows.push_back(std::move(w));
    }
  }
  write_or_print(out_path, windows_to_jsonl(windows), out);
}

void run_votes(const ExperimentConfig& config, const std::string& out_path, std::ostream& out) {
  config.criteria.validate();
  if (config.taus.size() != 1) throw Error(ErrorCode::kConfig, "votes needs a single alert type: --tau rr or spo2");
  const auto cohort = load_cohort(require_data_dir(config));
  auto options = config.dataset_options();
  options.keep_unlabeled = true;
  const auto data = build_dataset(cohort.records, cohort.labels, config.taus.front(), options);
  write_or_print(out_path, vote_matrix_to_csv(data.votes), out);
}

void run_train(const ExperimentConfig& config, std::ostream& out) {
  config.validate();
  const auto cohort = config_cohort(config);
  auto options = config.dataset_options();
  options.keep_unlabeled = true;
  for (const auto tau : config.taus) {
    const auto data = build_dataset(cohort.records, cohort.labels, tau, options);
    const auto models = train_models(data, config);
    const auto written = write_models(models, config.out_dir);
    out << alert_type_name(tau) << ": label model and forest fit on " << models.windows << " windows ("
        << models.forest_rows << " with votes), " << written.size() << " files in " << config.out_dir << "\n";
  }
}

void run_evaluate(const ExperimentConfig& config, std::ostream& out) {
  const auto written = run_evaluation(config);
  out << "wrote " << written.size() << " files to " << config.out_dir << "\n";
}

void run_report(const std::string& report_path, const std::string& out_dir, std::ostream& out) {
  const auto report = load_report(report_path);
  const auto written = emit_report(report, out_dir);
  out << "wrote " << written.size() << " files to " << out_dir << "\n";
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weak supervision for vital-sign alert adjudication", "vitalws"};
  app.require_subcommand(1);
  app.footer(key_listing());

  const auto is_number = CLI::Number;
  std::deque<Invocation> invocations;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort with planted real and artifact alerts");
  auto& synth_inv = invocations.emplace_back();
  add_config_flags(synth, synth_inv);
  bind(synth, synth_inv, "--patients", "synth.patients", "Number of patients")->check(is_number);
  bind(synth, synth_inv, "--hours", "synth.hours", "Hours per patient")->check(is_number);
  bind(synth, synth_inv, "--artifact-rate", "synth.artifact_rate", "Fraction of planted alerts that are artifacts")
      ->check(is_number);
  bind(synth, synth_inv, "--kinds", "synth.kinds", "Comma-separated artifact kinds", comma_list_to_json);
  bind(synth, synth_inv, "--seed", "seed", "Master seed")->check(CLI::NonNegativeNumber);
  bind(synth, synth_inv, "--workers", "workers", "Worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
  bind(synth, synth_inv, "--out", "data_dir", "Output directory");

  auto* detect = app.add_subcommand("detect", "Detect alert events and emit their analysis windows as JSONL");
  auto& detect_inv = invocations.emplace_back();
  std::string detect_out;
  add_config_flags(detect, detect_inv);
  bind(detect, detect_inv, "--data", "data_dir", "Cohort directory");
  bind(detect, detect_inv, "--tau", "tau", "rr, spo2 or both");
  detect->add_option("--out", detect_out, "Output file, default stdout");

  auto* votes = app.add_subcommand("votes", "Apply the labeling functions and emit the vote matrix as CSV");
  auto& votes_inv = invocations.emplace_back();
  std::string votes_out;
  add_config_flags(votes, votes_inv);
  bind(votes, votes_inv, "--data", "data_dir", "Cohort directory");
  bind(votes, votes_inv, "--tau", "tau", "rr or spo2");
  bind(votes, votes_inv, "--workers", "workers", "Worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
  votes->add_option("--out", votes_out, "Output file, default stdout");

  auto* train = app.add_subcommand("train", "Fit the label model and a forest on all windows and save them");
  auto& train_inv = invocations.emplace_back();
  add_config_flags(train, train_inv);
  bind(train, train_inv, "--data", "data_dir", "Cohort directory, default: generate from the synth keys");
  bind(train, train_inv, "--tau", "tau", "rr, spo2 or both");
  bind(train, train_inv, "--seed", "seed", "Master seed")->check(CLI::NonNegativeNumber);
  bind(train, train_inv, "--workers", "workers", "Worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
  bind(train, train_inv, "--out", "out_dir", "Model directory");

  auto* evaluate = app.add_subcommand("evaluate", "Leave-one-patient-out experiment, writes the report bundle");
  auto& evaluate_inv = invocations.emplace_back();
  add_config_flags(evaluate, evaluate_inv);
  bind(evaluate, evaluate_inv, "--data", "data_dir", "Cohort directory, default: generate from the synth keys");
  bind(evaluate, evaluate_inv, "--tau", "tau", "rr, spo2 or both");
  bind(evaluate, evaluate_inv, "--seed", "seed", "Master seed")->check(CLI::NonNegativeNumber);
  bind(evaluate, evaluate_inv, "--workers", "workers", "Worker threads, 0 = all cores")
      ->check(CLI::NonNegativeNumber);
  bind(evaluate, evaluate_inv, "--out", "out_dir", "Report directory");

  auto* report = app.add_subcommand("report", "Rebuild tables and ROC plots from a saved report JSON");
  std::string report_path, report_out;
  report->add_option("--report", report_path, "<tau>_report.json written by evaluate")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--out", report_out, "Output directory")->required();

  for (auto* sub : {synth, detect, votes, train, evaluate, report}) sub->footer(key_listing());

  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("vitalws");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << one_line(e.what()) << "\n";
    return kExitUsage;
  }

  try {
    if (synth->parsed()) {
      run_synth(assemble(synth_inv), out);
    } else if (detect->parsed()) {
      run_detect(assemble(detect_inv), detect_out, out);
    } else if (votes->parsed()) {
      run_votes(assemble(votes_inv), votes_out, out);
    } else if (train->parsed()) {
      run_train(assemble(train_inv), out);
    } else if (evaluate->parsed()) {
      run_evaluate(assemble(evaluate_inv), out);
    } else if (report->parsed()) {
      run_report(report_path, report_out, out);
    }
  } catch (const Error& e) {
    err << "error: " << error_code_name(e.code()) << ": " << one_line(e.what()) << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: internal: " << one_line(e.what()) << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace vitalws::cli
