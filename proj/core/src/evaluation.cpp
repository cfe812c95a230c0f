#include "vitalws/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vitalws/error.hpp"
#include "vitalws/parallel.hpp"
#include "vitalws/rng.hpp"

namespace vitalws {

namespace {

constexpr Labeler kLabelers[] = {Labeler::kWeakSup, Labeler::kFullySup, Labeler::kMajorityVote,
                                 Labeler::kProbLabels};
constexpr Ablation kAblations[] = {Ablation::kWithWaveform, Ablation::kWithoutWaveform};

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::vector<ImportanceEntry> ranked(const std::map<std::string, double>& sums, double folds) {
  std::vector<ImportanceEntry> out;
  for (const auto& [name, s] : sums) out.push_back({name, s / folds});
  std::stable_sort(out.begin(), out.end(),
                   [](const ImportanceEntry& a, const ImportanceEntry& b) { return a.score > b.score; });
  return out;
}

// Train rows paired with their training targets.
struct TrainingSet {
  std::vector<std::size_t> rows;  // positions within the fold's train list
  std::vector<int> y;
};

TrainingSet crisp_targets(const std::vector<ProbabilisticLabel>& probs) {
  std::map<std::string, int> crisp;
  for (const auto& c : to_crisp_labels(probs)) crisp[c.row_id] = c.y;
  TrainingSet t;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const auto it = crisp.find(probs[k].row_id);
    if (it == crisp.end()) continue;
    t.rows.push_back(k);
    t.y.push_back(it->second);
  }
  return t;
}

FeatureMatrix take_rows(const FeatureMatrix& m, const std::vector<std::size_t>& rows) {
  FeatureMatrix out{m.names, rows.size(), {}};
  out.values.reserve(rows.size() * m.cols());
  for (const auto i : rows) {
    out.values.insert(out.values.end(), m.values.begin() + static_cast<std::ptrdiff_t>(i * m.cols()),
                      m.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * m.cols()));
  }
  return out;
}

struct ArmFold {
  std::vector<double> scores;  // in fold test order
  std::map<std::string, double> gini;
  std::map<std::string, double> permutation;
};

struct FoldOutput {
  std::vector<ArmFold> arms;
};

FoldOutput run_fold(const Dataset& data, const Fold& fold, std::size_t fold_index, const std::vector<int>& y,
                    const ExperimentOptions& opt) {
  FoldOutput out;
  std::vector<FeatureVector> train_features, test_features;
  for (const auto i : fold.train) train_features.push_back(data.features[i]);
  for (const auto i : fold.test) test_features.push_back(data.features[i]);
  const auto policy = fit_missingness_policy(train_features);
  const auto x_train = apply_missingness_policy(policy, train_features);
  const auto x_test = apply_missingness_policy(policy, test_features);
  const auto train_votes = data.votes.select_rows(fold.train);
  const auto test_votes = data.votes.select_rows(fold.test);
  std::vector<int> y_test;
  for (const auto i : fold.test) y_test.push_back(y[i]);

  const bool needs_label_model = std::any_of(opt.arms.begin(), opt.arms.end(), [](const ExperimentArm& a) {
    return a.labeler == Labeler::kWeakSup || a.labeler == Labeler::kProbLabels;
  });
  LabelModelParams params;
  if (needs_label_model) params = fit_label_model(train_votes, opt.class_balance, opt.label_model);

  for (const auto& arm : opt.arms) {
    ArmFold af;
    try {
      if (arm.labeler == Labeler::kProbLabels) {
        for (const auto& p : posteriors(params, test_votes)) af.scores.push_back(p.p_artifact);
        out.arms.push_back(std::move(af));
        continue;
      }
      TrainingSet targets;
      switch (arm.labeler) {
        case Labeler::kFullySup:
          for (std::size_t k = 0; k < fold.train.size(); ++k) {
            targets.rows.push_back(k);
            targets.y.push_back(y[fold.train[k]]);
          }
          break;
        case Labeler::kWeakSup:
          targets = crisp_targets(posteriors(params, train_votes));
          break;
        case Labeler::kMajorityVote:
          targets = crisp_targets(majority_votes(train_votes, opt.class_balance));
          break;
        case Labeler::kProbLabels:
          break;
      }
      const auto keep = [&](const std::string& name) {
        return arm.ablation == Ablation::kWithWaveform || is_numeric_aggregate(name);
      };
      const auto xtr = take_rows(x_train, targets.rows).select_columns(keep);
      const auto xte = x_test.select_columns(keep);
      if (xtr.cols() == 0) throw Error(ErrorCode::kInvalidArgument, "no features left after the missingness policy");

      auto hyper = opt.forest;
      hyper.workers = 1;
      hyper.seed = derived_rng({opt.seed, fold_index, static_cast<std::uint64_t>(arm.labeler),
                                static_cast<std::uint64_t>(arm.ablation)})();
      const auto model = train_random_forest(xtr, targets.y, hyper);
      af.scores = model.predict_proba(xte);
      for (const auto& e : feature_importance(model, xte, y_test, ImportanceMode::kGini)) af.gini[e.feature] = e.score;
      for (const auto& e :
           feature_importance(model, xte, y_test, ImportanceMode::kPermutation, opt.pfi_repeats, hyper.seed)) {
        af.permutation[e.feature] = e.score;
      }
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), "fold " + fold.patient_id + ", arm " + arm_key(arm));
    }
    out.arms.push_back(std::move(af));
  }
  return out;
}

// ---- report files ----

std::string fmt(double v) { return std::isinf(v) ? (v > 0 ? "inf" : "-inf") : format_double(v); }

std::string arm_file_stem(AlertType tau, const ExperimentArm& arm) {
  return tau_file_token(tau) + "_" + std::string(labeler_name(arm.labeler)) + "_" +
         std::string(ablation_name(arm.ablation));
}

void write_file(const std::filesystem::path& path, const std::string& text, std::vector<std::filesystem::path>& written) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot write file", path.string());
  f << text;
  if (!f) throw Error(ErrorCode::kIo, "write failed", path.string());
  written.push_back(path);
}

std::string num(double v, int decimals = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

struct Curve {
  std::vector<double> x, y, lo, hi;
  double floor = 0.0;
};

// Rate on a log x axis against a linear y axis, with the Wilson band shaded.
std::string roc_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel, const Curve& c) {
  constexpr double kW = 480, kH = 400, kL = 60, kR = 20, kT = 40, kB = 50;
  const double pw = kW - kL - kR, ph = kH - kT - kB;
  const double lmin = std::log10(c.floor);
  const auto px = [&](double v) { return kL + (std::log10(std::max(v, c.floor)) - lmin) / -lmin * pw; };
  const auto py = [&](double v) { return kT + (1.0 - v) * ph; };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW
    << ' ' << kH << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
    << title << "</text>\n";
  s << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int e = static_cast<int>(std::ceil(lmin)); e <= 0; ++e) {
    const double x = px(std::pow(10.0, e));
    s << "<line x1=\"" << num(x) << "\" y1=\"" << kT << "\" x2=\"" << num(x) << "\" y2=\"" << kT + ph
      << "\" stroke=\"#ddd\"/>\n";
    s << "<text x=\"" << num(x) << "\" y=\"" << kT + ph + 16
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">1e" << e << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double y = py(k / 4.0);
    s << "<line x1=\"" << kL << "\" y1=\"" << num(y) << "\" x2=\"" << kL + pw << "\" y2=\"" << num(y)
      << "\" stroke=\"#ddd\"/>\n";
    s << "<text x=\"" << kL - 6 << "\" y=\"" << num(y + 4)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(k / 4.0) << "</text>\n";
  }
  s << "<polygon fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\" points=\"";
  for (std::size_t k = 0; k < c.x.size(); ++k) s << num(px(c.x[k])) << ',' << num(py(c.hi[k])) << ' ';
  for (std::size_t k = c.x.size(); k-- > 0;) s << num(px(c.x[k])) << ',' << num(py(c.lo[k])) << ' ';
  s << "\"/>\n";
  s << "<polyline fill=\"none\" stroke=\"#08519c\" stroke-width=\"1.5\" points=\"";
  for (std::size_t k = 0; k < c.x.size(); ++k) s << num(px(c.x[k])) << ',' << num(py(c.y[k])) << ' ';
  s << "\"/>\n";
  s << "<text x=\"" << kL + pw / 2 << "\" y=\"" << kH - 10
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xlabel << " (log scale)</text>\n";
  s << "<text x=\"16\" y=\"" << kT + ph / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
    << "transform=\"rotate(-90 16 " << kT + ph / 2 << ")\">" << ylabel << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

std::string importance_csv(const std::vector<ImportanceEntry>& entries) {
  std::string out = "rank,feature,score\n";
  for (std::size_t k = 0; k < entries.size(); ++k) {
    out += std::to_string(k + 1) + "," + entries[k].feature + "," + fmt(entries[k].score) + "\n";
  }
  return out;
}

nlohmann::json importance_json(const std::vector<ImportanceEntry>& entries) {
  auto j = nlohmann::json::array();
  for (const auto& e : entries) j.push_back({e.feature, e.score});
  return j;
}

std::vector<ImportanceEntry> importance_from_json(const nlohmann::json& j) {
  std::vector<ImportanceEntry> out;
  for (const auto& e : j) out.push_back({e.at(0).get<std::string>(), e.at(1).get<double>()});
  return out;
}

}  // namespace

std::string_view labeler_name(Labeler l) noexcept {
  switch (l) {
    case Labeler::kWeakSup: return "WEAK_SUP";
    case Labeler::kFullySup: return "FULLY_SUP";
    case Labeler::kMajorityVote: return "MAJORITY_VOTE";
    case Labeler::kProbLabels: return "PROB_LABELS";
  }
  return "";
}

std::string_view ablation_name(Ablation a) noexcept {
  return a == Ablation::kWithWaveform ? "WITH_WAVEFORM" : "WITHOUT_WAVEFORM";
}

std::optional<Labeler> parse_labeler(std::string_view text) noexcept {
  const auto u = upper(text);
  for (const auto l : kLabelers) {
    if (u == labeler_name(l)) return l;
  }
  return std::nullopt;
}

std::optional<Ablation> parse_ablation(std::string_view text) noexcept {
  const auto u = upper(text);
  for (const auto a : kAblations) {
    if (u == ablation_name(a)) return a;
  }
  return std::nullopt;
}

std::string arm_display_name(const ExperimentArm& arm) {
  const bool with = arm.ablation == Ablation::kWithWaveform;
  switch (arm.labeler) {
    case Labeler::kWeakSup: return with ? "Weak Sup." : "WS w/o WF";
    case Labeler::kFullySup: return with ? "Fully Sup." : "Sup. w/o WF";
    case Labeler::kMajorityVote: return with ? "Majority Vote" : "Maj. w/o WF";
    case Labeler::kProbLabels: return "Prob. Labels";
  }
  return "";
}

std::vector<ExperimentArm> default_arms() {
  using L = Labeler;
  using A = Ablation;
  return {{L::kWeakSup, A::kWithWaveform},       {L::kMajorityVote, A::kWithWaveform},
          {L::kFullySup, A::kWithWaveform},      {L::kProbLabels, A::kWithWaveform},
          {L::kWeakSup, A::kWithoutWaveform},    {L::kFullySup, A::kWithoutWaveform},
          {L::kMajorityVote, A::kWithoutWaveform}};
}

std::string arm_key(const ExperimentArm& arm) {
  return std::string(labeler_name(arm.labeler)) + "/" + std::string(ablation_name(arm.ablation));
}

ExperimentArm parse_arm_key(std::string_view key) {
  const auto slash = key.find('/');
  const auto l = parse_labeler(key.substr(0, slash));
  const auto a = slash == std::string_view::npos ? std::optional(Ablation::kWithWaveform)
                                                 : parse_ablation(key.substr(slash + 1));
  if (!l || !a) throw Error(ErrorCode::kConfig, "unknown arm", std::string(key));
  return {*l, *a};
}

Dataset build_dataset(const std::vector<PatientRecord>& records, const std::vector<GroundTruthLabel>& labels,
                      AlertType tau, const DatasetOptions& options) {
  options.criteria.validate();
  Dataset data;
  data.tau = tau;
  std::vector<const PatientRecord*> owner;
  for (const auto& record : records) {
    std::vector<AlertEvent> events;
    try {
      events = detect_alert_events(record, tau, options.criteria);
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), "patient " + record.patient_id);
    }
    attach_labels(events, labels);
    for (const auto& w : windows_from_events(events)) {
      if (!w.y) {
        ++data.unlabeled_windows;
        if (!options.keep_unlabeled) continue;
      }
      data.windows.push_back(w);
      owner.push_back(&record);
    }
  }

  const auto lfs = lf_suite(tau, options.thresholds);
  const std::size_t m = lfs.size();
  std::vector<Vote> votes(data.windows.size() * m);
  data.features.resize(data.windows.size());
  parallel_for(data.windows.size(), options.workers, [&](std::size_t i) {
    const auto ctx = make_context(*owner[i], data.windows[i], options.dsp);
    for (std::size_t j = 0; j < m; ++j) votes[i * m + j] = lfs[j].evaluate(ctx);
    data.features[i] = extract_features(ctx, tau);
  });
  std::vector<std::string> row_ids, names;
  for (const auto& w : data.windows) row_ids.push_back(w.row_id());
  for (const auto& lf : lfs) names.push_back(lf.name);
  data.votes = VoteMatrix(std::move(row_ids), std::move(names), std::move(votes));
  return data;
}

std::vector<Fold> lopo_folds(const std::vector<AlertWindow>& windows) {
  std::map<std::string, std::vector<std::size_t>> by_patient;
  for (std::size_t i = 0; i < windows.size(); ++i) by_patient[windows[i].patient_id].push_back(i);
  if (by_patient.size() < 2) {
    throw Error(ErrorCode::kTooFewPatients, "leave-one-patient-out needs at least 2 patients, got " +
                                                std::to_string(by_patient.size()));
  }
  std::vector<Fold> folds;
  for (const auto& [patient, rows] : by_patient) {
    Fold f;
    f.patient_id = patient;
    f.test = rows;
    for (std::size_t i = 0; i < windows.size(); ++i) {
      if (windows[i].patient_id != patient) f.train.push_back(i);
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

void ExperimentOptions::validate() const {
  if (!(class_balance > 0.0 && class_balance < 1.0)) throw Error(ErrorCode::kConfig, "class_balance must be in (0, 1)");
  if (arms.empty()) throw Error(ErrorCode::kConfig, "no arms selected");
  std::set<std::string> seen;
  for (const auto& a : arms) {
    if (!seen.insert(arm_key(a)).second) throw Error(ErrorCode::kConfig, "duplicate arm", arm_key(a));
    if (a.labeler == Labeler::kProbLabels && a.ablation == Ablation::kWithoutWaveform) {
      throw Error(ErrorCode::kConfig, "PROB_LABELS has no end model to ablate", arm_key(a));
    }
  }
  if (pfi_repeats < 1) throw Error(ErrorCode::kConfig, "pfi_repeats must be >= 1");
  if (forest.trees < 1 || forest.max_depth < 0) throw Error(ErrorCode::kConfig, "bad forest settings");
  if (!(label_model.lr > 0.0) || label_model.epochs < 0 || label_model.l2 < 0.0) {
    throw Error(ErrorCode::kConfig, "bad label model settings");
  }
}

EvaluationReport run_experiment(const Dataset& data, const ExperimentOptions& options) {
  options.validate();
  const std::size_t n = data.windows.size();
  if (data.votes.rows() != n || data.features.size() != n) {
    throw Error(ErrorCode::kInvalidArgument, "dataset parts differ in length");
  }
  EvaluationReport report;
  report.tau = data.tau;
  for (const auto& w : data.windows) {
    if (!w.y) throw Error(ErrorCode::kInvalidArgument, "window without ground truth", w.row_id());
    report.row_ids.push_back(w.row_id());
    report.patient_ids.push_back(w.patient_id);
    report.labels.push_back(*w.y);
  }
  const auto folds = lopo_folds(data.windows);

  std::vector<FoldOutput> outputs(folds.size());
  parallel_for(folds.size(), options.workers,
               [&](std::size_t f) { outputs[f] = run_fold(data, folds[f], f, report.labels, options); });

  const auto nf = static_cast<double>(folds.size());
  for (std::size_t a = 0; a < options.arms.size(); ++a) {
    ArmResult r;
    r.arm = options.arms[a];
    r.end_model = r.arm.labeler != Labeler::kProbLabels;
    r.scores.assign(n, 0.0);
    std::map<std::string, double> gini, perm;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const auto& af = outputs[f].arms[a];
      std::vector<double> s;
      std::vector<int> y;
      for (std::size_t k = 0; k < folds[f].test.size(); ++k) {
        r.scores[folds[f].test[k]] = af.scores[k];
        s.push_back(af.scores[k]);
        y.push_back(report.labels[folds[f].test[k]]);
      }
      FoldResult fr;
      fr.patient_id = folds[f].patient_id;
      fr.windows = y.size();
      fr.artifacts = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
      std::size_t hit = 0;
      for (std::size_t k = 0; k < y.size(); ++k) hit += (s[k] > 0.5 ? 1 : 0) == y[k];
      fr.accuracy = static_cast<double>(hit) / static_cast<double>(y.size());
      if (fr.artifacts > 0 && fr.artifacts < fr.windows) fr.auc = roc_and_auc(s, y).auc;
      r.folds.push_back(std::move(fr));
      for (const auto& [name, v] : af.gini) gini[name] += v;
      for (const auto& [name, v] : af.permutation) perm[name] += v;
    }
    try {
      r.metrics = compute_metrics(r.scores, report.labels);
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), "arm " + arm_key(r.arm));
    }
    if (r.end_model) {
      r.gini = ranked(gini, nf);
      r.permutation = ranked(perm, nf);
    }
    report.arms.push_back(std::move(r));
  }
  return report;
}

std::string tau_file_token(AlertType tau) { return tau == AlertType::kRR ? "rr" : "spo2"; }

std::vector<std::filesystem::path> emit_report(const EvaluationReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create output directory: " + ec.message(), out_dir.string());
  std::vector<std::filesystem::path> written;
  const auto tau = tau_file_token(report.tau);

  write_file(out_dir / (tau + "_report.json"), nlohmann::json(report).dump(1) + "\n", written);

  std::string metrics = "Model,Accuracy,AUC,FPR 50% TPR,FNR 50% TNR,TPR 1% FPR,TNR 1% FNR\n";
  std::string per_fold = "arm,ablation,patient_id,windows,artifacts,accuracy,auc\n";
  for (const auto& r : report.arms) {
    const auto& m = r.metrics;
    metrics += arm_display_name(r.arm) + "," + fmt(m.accuracy) + "," + fmt(m.auc) + "," + fmt(m.op.fpr_at_50tpr) +
               "," + fmt(m.op.fnr_at_50tnr) + "," + fmt(m.op.tpr_at_1fpr) + "," + fmt(m.op.tnr_at_1fnr) + "\n";
    for (const auto& f : r.folds) {
      per_fold += std::string(labeler_name(r.arm.labeler)) + "," + std::string(ablation_name(r.arm.ablation)) + "," +
                  f.patient_id + "," + std::to_string(f.windows) + "," + std::to_string(f.artifacts) + "," +
                  fmt(f.accuracy) + "," + (f.auc ? fmt(*f.auc) : "") + "\n";
    }
  }
  write_file(out_dir / (tau + "_metrics.csv"), metrics, written);
  write_file(out_dir / (tau + "_per_fold.csv"), per_fold, written);

  for (const auto& r : report.arms) {
    const auto stem = arm_file_stem(report.tau, r.arm);
    const auto roc = roc_and_auc(r.scores, report.labels);
    std::string fpr_csv = "threshold,fpr,tpr,tpr_lo,tpr_hi\n";
    std::string fnr_csv = "threshold,fnr,tnr,tnr_lo,tnr_hi\n";
    Curve by_fpr, by_fnr;
    by_fpr.floor = 1.0 / static_cast<double>(roc.negatives);
    by_fnr.floor = 1.0 / static_cast<double>(roc.positives);
    for (std::size_t k = 0; k < roc.points.size(); ++k) {
      const auto& p = roc.points[k];
      const auto [tlo, thi] = wilson_interval(p.tp, roc.positives);
      const auto [nlo, nhi] = wilson_interval(roc.negatives - p.fp, roc.negatives);
      fpr_csv += fmt(p.threshold) + "," + fmt(roc.fpr(k)) + "," + fmt(roc.tpr(k)) + "," + fmt(tlo) + "," + fmt(thi) + "\n";
      fnr_csv += fmt(p.threshold) + "," + fmt(roc.fnr(k)) + "," + fmt(roc.tnr(k)) + "," + fmt(nlo) + "," + fmt(nhi) + "\n";
      by_fpr.x.push_back(roc.fpr(k));
      by_fpr.y.push_back(roc.tpr(k));
      by_fpr.lo.push_back(tlo);
      by_fpr.hi.push_back(thi);
    }
    // The flipped curve runs from high FNR to low, so walk it in reverse to keep x increasing.
    for (std::size_t k = roc.points.size(); k-- > 0;) {
      const auto [nlo, nhi] = wilson_interval(roc.negatives - roc.points[k].fp, roc.negatives);
      by_fnr.x.push_back(roc.fnr(k));
      by_fnr.y.push_back(roc.tnr(k));
      by_fnr.lo.push_back(nlo);
      by_fnr.hi.push_back(nhi);
    }
    const std::string title = std::string(alert_type_name(report.tau)) + " " + arm_display_name(r.arm) +
                              " (AUC " + num(r.metrics.auc, 3) + ")";
    write_file(out_dir / (stem + "_roc_fpr.csv"), fpr_csv, written);
    write_file(out_dir / (stem + "_roc_fnr.csv"), fnr_csv, written);
    write_file(out_dir / (stem + "_roc_fpr.svg"), roc_svg(title, "FPR", "TPR", by_fpr), written);
    write_file(out_dir / (stem + "_roc_fnr.svg"), roc_svg(title, "FNR", "TNR", by_fnr), written);

    std::string scores = "row_id,patient_id,y,p_artifact\n";
    for (std::size_t i = 0; i < report.row_ids.size(); ++i) {
      scores += report.row_ids[i] + "," + report.patient_ids[i] + "," + std::to_string(report.labels[i]) + "," +
                fmt(r.scores[i]) + "\n";
    }
    write_file(out_dir / (stem + "_scores.csv"), scores, written);
    if (r.end_model) {
      write_file(out_dir / (stem + "_gini.csv"), importance_csv(r.gini), written);
      write_file(out_dir / (stem + "_pfi.csv"), importance_csv(r.permutation), written);
    }
  }
  return written;
}

EvaluationReport load_report(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::kIo, "cannot read report", path.string());
  try {
    return nlohmann::json::parse(f).get<EvaluationReport>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaMismatch, std::string("bad report: ") + e.what(), path.string());
  }
}

void to_json(nlohmann::json& j, const EvaluationReport& r) {
  auto arms = nlohmann::json::array();
  for (const auto& a : r.arms) {
    auto folds = nlohmann::json::array();
    for (const auto& f : a.folds) {
      nlohmann::json jf{{"patient_id", f.patient_id}, {"windows", f.windows}, {"artifacts", f.artifacts},
                        {"accuracy", f.accuracy}};
      if (f.auc) jf["auc"] = *f.auc;
      folds.push_back(std::move(jf));
    }
    const auto& m = a.metrics;
    arms.push_back({{"arm", arm_key(a.arm)},
                    {"end_model", a.end_model},
                    {"metrics",
                     {{"accuracy", m.accuracy},
                      {"auc", m.auc},
                      {"fpr_at_50tpr", m.op.fpr_at_50tpr},
                      {"fnr_at_50tnr", m.op.fnr_at_50tnr},
                      {"tpr_at_1fpr", m.op.tpr_at_1fpr},
                      {"tnr_at_1fnr", m.op.tnr_at_1fnr}}},
                    {"folds", std::move(folds)},
                    {"gini", importance_json(a.gini)},
                    {"permutation", importance_json(a.permutation)},
                    {"scores", a.scores}});
  }
  j = nlohmann::json{{"tau", alert_type_name(r.tau)},
                     {"row_ids", r.row_ids},
                     {"patient_ids", r.patient_ids},
                     {"labels", r.labels},
                     {"arms", std::move(arms)}};
}

void from_json(const nlohmann::json& j, EvaluationReport& r) {
  const auto tau = parse_alert_type(j.at("tau").get<std::string>());
  if (!tau) throw Error(ErrorCode::kSchemaMismatch, "bad alert type in report");
  r.tau = *tau;
  r.row_ids = j.at("row_ids").get<std::vector<std::string>>();
  r.patient_ids = j.at("patient_ids").get<std::vector<std::string>>();
  r.labels = j.at("labels").get<std::vector<int>>();
  r.arms.clear();
  for (const auto& ja : j.at("arms")) {
    ArmResult a;
    a.arm = parse_arm_key(ja.at("arm").get<std::string>());
    a.end_model = ja.at("end_model").get<bool>();
    const auto& m = ja.at("metrics");
    a.metrics.accuracy = m.at("accuracy").get<double>();
    a.metrics.auc = m.at("auc").get<double>();
    a.metrics.op.fpr_at_50tpr = m.at("fpr_at_50tpr").get<double>();
    a.metrics.op.fnr_at_50tnr = m.at("fnr_at_50tnr").get<double>();
    a.metrics.op.tpr_at_1fpr = m.at("tpr_at_1fpr").get<double>();
    a.metrics.op.tnr_at_1fnr = m.at("tnr_at_1fnr").get<double>();
    for (const auto& jf : ja.at("folds")) {
      FoldResult f;
      f.patient_id = jf.at("patient_id").get<std::string>();
      f.windows = jf.at("windows").get<std::size_t>();
      f.artifacts = jf.at("artifacts").get<std::size_t>();
      f.accuracy = jf.at("accuracy").get<double>();
      if (jf.contains("auc")) f.auc = jf.at("auc").get<double>();
      a.folds.push_back(std::move(f));
    }
    a.gini = importance_from_json(ja.at("gini"));
    a.permutation = importance_from_json(ja.at("permutation"));
    a.scores = ja.at("scores").get<std::vector<double>>();
    if (a.scores.size() != r.row_ids.size()) throw Error(ErrorCode::kSchemaMismatch, "score count differs from rows");
    r.arms.push_back(std::move(a));
  }
  if (r.labels.size() != r.row_ids.size() || r.patient_ids.size() != r.row_ids.size()) {
    throw Error(ErrorCode::kSchemaMismatch, "report columns differ in length");
  }
}

}  // namespace vitalws
