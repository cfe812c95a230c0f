#include "vitalws/config.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "vitalws/error.hpp"
#include "vitalws/rng.hpp"

namespace vitalws {

using nlohmann::json;

namespace {

void check_object(const json& j, const std::set<std::string>& known, const std::string& what) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, what + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::kConfig, "unknown " + what + " key", key);
  }
}

void read(const json& j, const char* key, double& out, const std::string& what) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_number()) throw Error(ErrorCode::kConfig, what + "." + key + " must be a number");
  out = j.at(key).get<double>();
}

void read(const json& j, const char* key, int& out, const std::string& what) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_number_integer()) throw Error(ErrorCode::kConfig, what + "." + key + " must be an integer");
  out = j.at(key).get<int>();
}

void read(const json& j, const char* key, std::size_t& out, const std::string& what) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw Error(ErrorCode::kConfig, what + "." + key + " must be a non-negative integer");
  }
  out = v.get<std::size_t>();
}

void read(const json& j, const char* key, std::string& out, const std::string& what) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_string()) throw Error(ErrorCode::kConfig, what + "." + key + " must be a string");
  out = j.at(key).get<std::string>();
}

// null or absent keeps the seed unset.
void read_seed(const json& j, const char* key, std::optional<std::uint64_t>& out, const std::string& what) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw Error(ErrorCode::kConfig, what + "." + key + " must be a non-negative integer");
  }
  out = v.get<std::uint64_t>();
}

template <class T>
T as(const json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, "bad " + what + ": " + e.what());
  }
}

json peaks_json(const dsp::PeakParams& p) {
  return {{"min_distance_s", p.min_distance_s}, {"prominence_fraction", p.prominence_fraction}};
}

void read_peaks(const json& j, const char* key, dsp::PeakParams& p) {
  if (!j.contains(key)) return;
  const std::string what = std::string("dsp.") + key;
  check_object(j.at(key), {"min_distance_s", "prominence_fraction"}, what);
  read(j.at(key), "min_distance_s", p.min_distance_s, what);
  read(j.at(key), "prominence_fraction", p.prominence_fraction, what);
  if (!(p.min_distance_s > 0.0) || !(p.prominence_fraction >= 0.0 && p.prominence_fraction < 1.0)) {
    throw Error(ErrorCode::kConfig, what + " needs min_distance_s > 0 and prominence_fraction in [0, 1)");
  }
}

void read_band(const json& j, const char* key, dsp::Band& b) {
  if (!j.contains(key)) return;
  const std::string what = std::string("dsp.") + key;
  check_object(j.at(key), {"lo_hz", "hi_hz"}, what);
  read(j.at(key), "lo_hz", b.lo_hz, what);
  read(j.at(key), "hi_hz", b.hi_hz, what);
  if (!(b.lo_hz >= 0.0 && b.lo_hz < b.hi_hz)) throw Error(ErrorCode::kConfig, what + " needs 0 <= lo_hz < hi_hz");
}

void write_text(const std::filesystem::path& path, const std::string& text, std::vector<std::filesystem::path>& out) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot write file", path.string());
  f << text;
  if (!f) throw Error(ErrorCode::kIo, "write failed", path.string());
  out.push_back(path);
}

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
  if (j.is_object() && !j.empty()) {
    for (const auto& [key, value] : j.items()) flatten(value, prefix.empty() ? key : prefix + "." + key, out);
    return;
  }
  out.emplace_back(prefix, j.dump());
}

}  // namespace

// ---- component JSON ----

void to_json(json& j, const AlertCriteria& c) {
  j = json{{"min_duration_s", c.min_duration_s}, {"persistence", c.persistence}, {"rr_low", c.rr_low},
           {"rr_high", c.rr_high},               {"spo2_low", c.spo2_low},       {"tolerance_s", c.tolerance_s},
           {"density", c.density}};
}

void from_json(const json& j, AlertCriteria& c) {
  const std::string what = "criteria";
  check_object(j, {"min_duration_s", "persistence", "rr_low", "rr_high", "spo2_low", "tolerance_s", "density"}, what);
  read(j, "min_duration_s", c.min_duration_s, what);
  read(j, "persistence", c.persistence, what);
  read(j, "rr_low", c.rr_low, what);
  read(j, "rr_high", c.rr_high, what);
  read(j, "spo2_low", c.spo2_low, what);
  read(j, "tolerance_s", c.tolerance_s, what);
  read(j, "density", c.density, what);
}

void to_json(json& j, const MissingnessPolicy& p) {
  j = json{{"features", p.features}, {"dropped", p.dropped}, {"impute", p.impute}};
}

void from_json(const json& j, MissingnessPolicy& p) {
  check_object(j, {"features", "dropped", "impute"}, "missingness policy");
  p.features = as<std::vector<std::string>>(j.at("features"), "missingness features");
  p.dropped = as<std::set<std::string>>(j.at("dropped"), "missingness dropped");
  p.impute = as<std::map<std::string, double>>(j.at("impute"), "missingness impute");
  for (const auto& f : p.features) {
    if (!p.impute.contains(f)) throw Error(ErrorCode::kConfig, "missingness policy lacks a fill value", f);
  }
}

namespace dsp {

void to_json(json& j, const DspConfig& c) {
  j = json{{"resp_peaks", peaks_json(c.resp_peaks)},
           {"pleth_peaks", peaks_json(c.pleth_peaks)},
           {"ecg_peaks", peaks_json(c.ecg_peaks)},
           {"rr_band", {{"lo_hz", c.rr_band.lo_hz}, {"hi_hz", c.rr_band.hi_hz}}},
           {"hr_band", {{"lo_hz", c.hr_band.lo_hz}, {"hi_hz", c.hr_band.hi_hz}}},
           {"resp_filter_order", c.resp_filter_order},
           {"resp_cutoff_hz", c.resp_cutoff_hz},
           {"ecg_highpass_hz", c.ecg_highpass_hz},
           {"powerline_hz", c.powerline_hz},
           {"extrema_iqr_fraction", c.extrema_iqr_fraction},
           {"flat_relative_iqr", c.flat_relative_iqr}};
}

void from_json(const json& j, DspConfig& c) {
  const std::string what = "dsp";
  check_object(j,
               {"resp_peaks", "pleth_peaks", "ecg_peaks", "rr_band", "hr_band", "resp_filter_order", "resp_cutoff_hz",
                "ecg_highpass_hz", "powerline_hz", "extrema_iqr_fraction", "flat_relative_iqr"},
               what);
  read_peaks(j, "resp_peaks", c.resp_peaks);
  read_peaks(j, "pleth_peaks", c.pleth_peaks);
  read_peaks(j, "ecg_peaks", c.ecg_peaks);
  read_band(j, "rr_band", c.rr_band);
  read_band(j, "hr_band", c.hr_band);
  read(j, "resp_filter_order", c.resp_filter_order, what);
  read(j, "resp_cutoff_hz", c.resp_cutoff_hz, what);
  read(j, "ecg_highpass_hz", c.ecg_highpass_hz, what);
  read(j, "powerline_hz", c.powerline_hz, what);
  read(j, "extrema_iqr_fraction", c.extrema_iqr_fraction, what);
  read(j, "flat_relative_iqr", c.flat_relative_iqr, what);
  if (c.resp_filter_order < 1 || c.resp_filter_order > 12) {
    throw Error(ErrorCode::kConfig, "dsp.resp_filter_order must lie in [1, 12]");
  }
  if (!(c.resp_cutoff_hz > 0.0) || !(c.ecg_highpass_hz > 0.0) || !(c.powerline_hz > 0.0)) {
    throw Error(ErrorCode::kConfig, "dsp filter frequencies must be positive");
  }
  if (!(c.extrema_iqr_fraction >= 0.0) || !(c.flat_relative_iqr >= 0.0)) {
    throw Error(ErrorCode::kConfig, "dsp fractions must be non-negative");
  }
}

}  // namespace dsp

CohortSpec SynthSection::spec(std::uint64_t master_seed, std::size_t workers) const {
  CohortSpec s;
  s.n_patients = patients;
  s.hours_per_patient = hours;
  s.artifact_rate = artifact_rate;
  s.seed = seed.value_or(master_seed);
  s.artifact_kinds = kinds;
  s.workers = workers;
  return s;
}

void to_json(json& j, const SynthSection& s) {
  std::vector<std::string> kinds;
  for (const auto k : s.kinds) kinds.emplace_back(artifact_kind_name(k));
  j = json{{"patients", s.patients}, {"hours", s.hours}, {"artifact_rate", s.artifact_rate}, {"kinds", kinds}};
  j["seed"] = s.seed ? json(*s.seed) : json(nullptr);
}

void from_json(const json& j, SynthSection& s) {
  const std::string what = "synth";
  check_object(j, {"patients", "hours", "artifact_rate", "kinds", "seed"}, what);
  read(j, "patients", s.patients, what);
  read(j, "hours", s.hours, what);
  read(j, "artifact_rate", s.artifact_rate, what);
  read_seed(j, "seed", s.seed, what);
  if (j.contains("kinds")) {
    s.kinds.clear();
    for (const auto& name : as<std::vector<std::string>>(j.at("kinds"), "synth.kinds")) {
      const auto k = parse_artifact_kind(name);
      if (!k) throw Error(ErrorCode::kConfig, "unknown artifact kind", name);
      s.kinds.push_back(*k);
    }
  }
}

// ---- experiment config ----

std::vector<AlertType> parse_tau_list(const std::string& text) {
  if (text == "both") return {AlertType::kRR, AlertType::kSpO2};
  if (const auto t = parse_alert_type(text)) return {*t};
  throw Error(ErrorCode::kConfig, "tau must be rr, spo2 or both", text);
}

std::string tau_list_name(const std::vector<AlertType>& taus) {
  if (taus.size() == 2) return "both";
  if (taus.size() == 1) return tau_file_token(taus.front());
  throw Error(ErrorCode::kConfig, "no alert type selected");
}

void ExperimentConfig::validate() const {
  if (!seed) throw Error(ErrorCode::kConfig, "seed is required (config key seed, --seed or VITALWS_SEED)");
  if (taus.empty()) throw Error(ErrorCode::kConfig, "no alert type selected");
  if (taus.size() == 2 && taus[0] == taus[1]) throw Error(ErrorCode::kConfig, "duplicate alert type");
  if (out_dir.empty()) throw Error(ErrorCode::kConfig, "out_dir is empty");
  criteria.validate();
  experiment_options().validate();
  if (data_dir.empty()) synth.spec(*seed, workers).validate();
}

void ExperimentConfig::resolve_seed() {
  if (seed) return;
  const char* env = std::getenv("VITALWS_SEED");
  if (env == nullptr || *env == '\0') return;
  const std::string text(env);
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.front() == '-') throw Error(ErrorCode::kConfig, "VITALWS_SEED is not an integer", text);
  seed = v;
}

DatasetOptions ExperimentConfig::dataset_options() const {
  DatasetOptions o;
  o.criteria = criteria;
  o.dsp = dsp;
  o.thresholds = lf_thresholds;
  o.workers = workers;
  return o;
}

ExperimentOptions ExperimentConfig::experiment_options() const {
  ExperimentOptions o;
  o.class_balance = class_balance;
  o.label_model = label_model;
  o.forest = forest;
  o.arms = arms;
  o.pfi_repeats = pfi_repeats;
  o.seed = seed.value_or(0);
  o.workers = workers;
  return o;
}

void to_json(json& j, const ExperimentConfig& c) {
  std::vector<std::string> arms;
  for (const auto& a : c.arms) arms.push_back(arm_key(a));
  j = json{{"data_dir", c.data_dir},
           {"tau", tau_list_name(c.taus)},
           {"criteria", c.criteria},
           {"dsp", c.dsp},
           {"lf_thresholds", c.lf_thresholds},
           {"class_balance", c.class_balance},
           {"label_model", c.label_model},
           {"forest", c.forest},
           {"arms", arms},
           {"out_dir", c.out_dir},
           {"pfi_repeats", c.pfi_repeats},
           {"workers", c.workers},
           {"synth", c.synth}};
  j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
}

void from_json(const json& j, ExperimentConfig& c) {
  const std::string what = "config";
  check_object(j,
               {"data_dir", "tau", "criteria", "dsp", "lf_thresholds", "class_balance", "label_model", "forest", "seed",
                "arms", "out_dir", "pfi_repeats", "workers", "synth"},
               what);
  read(j, "data_dir", c.data_dir, what);
  if (j.contains("tau")) {
    std::string tau;
    read(j, "tau", tau, what);
    c.taus = parse_tau_list(tau);
  }
  if (j.contains("criteria")) from_json(j.at("criteria"), c.criteria);
  if (j.contains("dsp")) dsp::from_json(j.at("dsp"), c.dsp);
  if (j.contains("lf_thresholds")) from_json(j.at("lf_thresholds"), c.lf_thresholds);
  read(j, "class_balance", c.class_balance, what);
  if (j.contains("label_model")) from_json(j.at("label_model"), c.label_model);
  if (j.contains("forest")) from_json(j.at("forest"), c.forest);
  read_seed(j, "seed", c.seed, what);
  if (j.contains("arms")) {
    c.arms.clear();
    for (const auto& key : as<std::vector<std::string>>(j.at("arms"), "arms")) c.arms.push_back(parse_arm_key(key));
  }
  read(j, "out_dir", c.out_dir, what);
  read(j, "pfi_repeats", c.pfi_repeats, what);
  read(j, "workers", c.workers, what);
  if (j.contains("synth")) from_json(j.at("synth"), c.synth);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kMissingFile, "cannot open config", path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, std::string("config is not valid JSON: ") + e.what(), path.string());
  }
  try {
    return j.get<ExperimentConfig>();
  } catch (const Error& e) {
    throw Error(e.code(), e.what(), path.string());
  }
}

void apply_override(json& config, const std::string& dotted_key, const std::string& value) {
  static const json defaults = ExperimentConfig{};
  const json* schema = &defaults;
  json* target = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted_key.find('.', start);
    const std::string part = dotted_key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty() || !schema->is_object() || !schema->contains(part)) {
      throw Error(ErrorCode::kConfig, "unknown config key", dotted_key);
    }
    schema = &schema->at(part);
    if (!target->is_object()) *target = json::object();
    target = &(*target)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (schema->is_object()) throw Error(ErrorCode::kConfig, "config key names a section, not a value", dotted_key);
  json parsed = json::parse(value, nullptr, false);
  if (parsed.is_discarded() || (schema->is_string() && !parsed.is_string())) parsed = value;
  *target = std::move(parsed);
}

std::vector<std::pair<std::string, std::string>> config_key_defaults() {
  std::vector<std::pair<std::string, std::string>> out;
  flatten(json(ExperimentConfig{}), "", out);
  return out;
}

// ---- runners ----

LoadedCohort load_cohort(const std::filesystem::path& dir) {
  LoadedCohort c;
  for (const auto& manifest : find_manifests(dir)) c.records.push_back(load_patient_record(manifest));
  if (c.records.empty()) throw Error(ErrorCode::kMissingFile, "no patient manifests found", dir.string());
  const auto labels = dir / "labels.csv";
  if (std::filesystem::exists(labels)) c.labels = load_labels(labels);
  return c;
}

LoadedCohort config_cohort(const ExperimentConfig& config) {
  if (!config.data_dir.empty()) return load_cohort(config.data_dir);
  auto cohort = generate_cohort(config.synth.spec(config.seed.value_or(0), config.workers));
  return {std::move(cohort.records), std::move(cohort.labels)};
}

std::vector<std::filesystem::path> run_evaluation(const ExperimentConfig& config) {
  config.validate();
  const auto cohort = config_cohort(config);
  const std::filesystem::path out_dir = config.out_dir;
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create output directory", out_dir.string());
  std::vector<std::filesystem::path> written;
  for (const auto tau : config.taus) {
    const auto data = build_dataset(cohort.records, cohort.labels, tau, config.dataset_options());
    if (data.windows.empty()) {
      throw Error(ErrorCode::kEmptyInput, "no labeled alert windows", std::string(alert_type_name(tau)));
    }
    const auto report = run_experiment(data, config.experiment_options());
    for (auto& p : emit_report(report, out_dir)) written.push_back(std::move(p));
  }
  write_text(out_dir / "config.json", json(config).dump(2) + "\n", written);
  return written;
}

TrainedModels train_models(const Dataset& data, const ExperimentConfig& config) {
  config.validate();
  if (data.windows.empty()) throw Error(ErrorCode::kEmptyInput, "no alert windows to train on");
  TrainedModels t;
  t.tau = data.tau;
  t.windows = data.windows.size();
  t.label_model = fit_label_model(data.votes, config.class_balance, config.label_model);
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < data.windows.size(); ++i) position[data.windows[i].row_id()] = i;
  std::vector<FeatureVector> rows;
  std::vector<int> y;
  for (const auto& c : to_crisp_labels(posteriors(t.label_model, data.votes))) {
    rows.push_back(data.features[position.at(c.row_id)]);
    y.push_back(c.y);
  }
  t.forest_rows = rows.size();
  if (rows.empty()) throw Error(ErrorCode::kEmptyInput, "no window received a vote");
  t.policy = fit_missingness_policy(rows);
  auto hyper = config.forest;
  hyper.workers = config.workers;
  hyper.seed = derived_rng({*config.seed, 0x747261696eULL, static_cast<std::uint64_t>(data.tau)})();
  t.forest = train_random_forest(apply_missingness_policy(t.policy, rows), y, hyper);
  return t;
}

std::vector<std::filesystem::path> write_models(const TrainedModels& models, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create output directory", dir.string());
  const auto tau = tau_file_token(models.tau);
  std::vector<std::filesystem::path> written;
  write_text(dir / (tau + "_label_model.json"), json(models.label_model).dump(1) + "\n", written);
  write_text(dir / (tau + "_missingness.json"), json(models.policy).dump(1) + "\n", written);
  write_text(dir / (tau + "_forest.json"), json(models.forest).dump() + "\n", written);
  return written;
}

}  // namespace vitalws
