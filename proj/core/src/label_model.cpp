#include "vitalws/label_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "vitalws/error.hpp"

namespace vitalws {

namespace {

double log_sum_exp(double a, double b) {
  const double hi = std::max(a, b);
  return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

// log(1 + e^p + e^{p+a}): log of the per-LF normaliser.
double log_normaliser(double acc, double prop) {
  const double hi = std::max({0.0, prop, prop + acc});
  return hi + std::log(std::exp(-hi) + std::exp(prop - hi) + std::exp(prop + acc - hi));
}

void check_params(const LabelModelParams& p) {
  if (p.theta_acc.size() != p.theta_prop.size()) {
    throw Error(ErrorCode::kInvalidArgument, "theta_acc and theta_prop differ in length");
  }
  if (!(p.class_balance > 0.0 && p.class_balance < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "class balance must lie in (0, 1)");
  }
}

// Distinct vote rows with multiplicities; the likelihood depends on nothing else.
struct Pattern {
  std::vector<Vote> votes;
  double count = 0.0;
};

// Kept in order of first appearance so that permuting columns leaves the
// accumulation order unchanged.
std::vector<Pattern> compress(const VoteMatrix& m) {
  std::map<std::vector<Vote>, std::size_t> slot;
  std::vector<Pattern> out;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto row = m.row(i);
    std::vector<Vote> key(row.begin(), row.end());
    const auto [it, fresh] = slot.emplace(std::move(key), out.size());
    if (fresh) out.push_back({it->first, 0.0});
    out[it->second].count += 1.0;
  }
  return out;
}

// Sum in sorted order: the result then does not depend on column order.
double ordered_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (const double t : terms) s += t;
  return s;
}

NllResult nll_over(const LabelModelParams& p, const std::vector<Pattern>& patterns) {
  const std::size_t m = p.size();
  NllResult r;
  r.grad_acc.assign(m, 0.0);
  r.grad_prop.assign(m, 0.0);

  // Row-independent normaliser terms.
  std::vector<double> log_zs(m);
  std::vector<double> dz_acc(m), dz_prop(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double log_z = log_normaliser(p.theta_acc[j], p.theta_prop[j]);
    log_zs[j] = log_z;
    dz_acc[j] = std::exp(p.theta_prop[j] + p.theta_acc[j] - log_z);
    dz_prop[j] = std::exp(p.theta_prop[j] - log_z) * (std::exp(p.theta_acc[j]) + 1.0);
  }

  const double sum_log_z = ordered_sum(log_zs);

  const double log_prior[2] = {std::log1p(-p.class_balance), std::log(p.class_balance)};
  std::vector<double> acc_terms[2];
  std::vector<double> prop_terms;
  for (const auto& pat : patterns) {
    acc_terms[0].clear();
    acc_terms[1].clear();
    prop_terms.clear();
    for (std::size_t j = 0; j < m; ++j) {
      const Vote v = pat.votes[j];
      if (v == Vote::kAbstain) continue;
      prop_terms.push_back(p.theta_prop[j]);
      acc_terms[v == Vote::kArtifact ? 1 : 0].push_back(p.theta_acc[j]);
    }
    const double score[2] = {log_prior[0] + ordered_sum(acc_terms[0]), log_prior[1] + ordered_sum(acc_terms[1])};
    const double prop_term = ordered_sum(prop_terms);
    const double lse = log_sum_exp(score[0], score[1]);
    const double resp1 = std::exp(score[1] - lse);
    const double log_lik = lse + prop_term - sum_log_z;
    r.value -= pat.count * log_lik;
    for (std::size_t j = 0; j < m; ++j) {
      const Vote v = pat.votes[j];
      double d_acc = -dz_acc[j];
      double d_prop = -dz_prop[j];
      if (v != Vote::kAbstain) {
        d_acc += v == Vote::kArtifact ? resp1 : 1.0 - resp1;
        d_prop += 1.0;
      }
      r.grad_acc[j] -= pat.count * d_acc;
      r.grad_prop[j] -= pat.count * d_prop;
    }
  }
  return r;
}

}  // namespace

LabelModelParams initial_params(std::size_t m, double class_balance, std::vector<std::string> lf_names) {
  LabelModelParams p;
  p.theta_acc.assign(m, 0.0);
  p.theta_prop.assign(m, 0.0);
  p.class_balance = class_balance;
  p.lf_names = std::move(lf_names);
  return p;
}

NllResult marginal_nll(const LabelModelParams& params, const VoteMatrix& m) {
  check_params(params);
  if (m.rows() == 0) throw Error(ErrorCode::kEmptyInput, "marginal likelihood of an empty vote matrix");
  if (m.cols() != params.size()) {
    throw Error(ErrorCode::kSchemaMismatch, "vote matrix width differs from parameter count");
  }
  return nll_over(params, compress(m));
}

LabelModelParams fit_label_model(const VoteMatrix& m, double class_balance, const LabelModelHyper& hyper) {
  if (m.rows() == 0) throw Error(ErrorCode::kEmptyInput, "cannot fit a label model to no rows");
  if (m.cols() == 0) throw Error(ErrorCode::kEmptyInput, "cannot fit a label model without LFs");
  auto p = initial_params(m.cols(), class_balance, m.lf_names());
  check_params(p);
  const auto patterns = compress(m);
  const double n = static_cast<double>(m.rows());
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    const auto r = nll_over(p, patterns);
    double loss = r.value / n;
    for (std::size_t j = 0; j < p.size(); ++j) {
      loss += hyper.l2 * (p.theta_acc[j] * p.theta_acc[j] + p.theta_prop[j] * p.theta_prop[j]);
    }
    if (!std::isfinite(loss)) {
      throw Error(ErrorCode::kDiverged, "label model loss is not finite",
                  "epoch " + std::to_string(epoch) + ", lr " + std::to_string(hyper.lr));
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      p.theta_acc[j] -= hyper.lr * (r.grad_acc[j] / n + 2.0 * hyper.l2 * p.theta_acc[j]);
      p.theta_prop[j] -= hyper.lr * (r.grad_prop[j] / n + 2.0 * hyper.l2 * p.theta_prop[j]);
    }
  }
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (!std::isfinite(p.theta_acc[j]) || !std::isfinite(p.theta_prop[j])) {
      throw Error(ErrorCode::kDiverged, "label model weights are not finite", p.lf_names[j]);
    }
  }
  return p;
}

ProbabilisticLabel posterior(const LabelModelParams& params, std::span<const Vote> row, std::string row_id) {
  check_params(params);
  if (row.size() != params.size()) {
    throw Error(ErrorCode::kSchemaMismatch, "vote row width differs from parameter count", row_id);
  }
  // The propensity factor is the same for both classes and cancels.
  double logit = std::log(params.class_balance) - std::log1p(-params.class_balance);
  bool covered = false;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (row[j] == Vote::kArtifact) logit += params.theta_acc[j];
    if (row[j] == Vote::kReal) logit -= params.theta_acc[j];
    covered = covered || row[j] != Vote::kAbstain;
  }
  const double p = logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit)) : std::exp(logit) / (1.0 + std::exp(logit));
  return {std::move(row_id), covered ? p : params.class_balance, covered};
}

std::vector<ProbabilisticLabel> posteriors(const LabelModelParams& params, const VoteMatrix& m) {
  std::vector<ProbabilisticLabel> out;
  out.reserve(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out.push_back(posterior(params, m.row(i), m.row_ids()[i]));
  return out;
}

ProbabilisticLabel majority_vote(std::span<const Vote> row, double class_prior, std::string row_id) {
  std::size_t artifact = 0;
  std::size_t voters = 0;
  for (const Vote v : row) {
    voters += v != Vote::kAbstain;
    artifact += v == Vote::kArtifact;
  }
  if (voters == 0) return {std::move(row_id), class_prior, false};
  const double p = 2 * artifact == voters ? 0.5 : static_cast<double>(artifact) / static_cast<double>(voters);
  return {std::move(row_id), p, true};
}

std::vector<ProbabilisticLabel> majority_votes(const VoteMatrix& m, double class_prior) {
  std::vector<ProbabilisticLabel> out;
  out.reserve(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out.push_back(majority_vote(m.row(i), class_prior, m.row_ids()[i]));
  return out;
}

std::vector<CrispLabel> to_crisp_labels(const std::vector<ProbabilisticLabel>& probs, double threshold,
                                        TieRule tie) {
  std::vector<CrispLabel> out;
  for (const auto& pl : probs) {
    if (!pl.covered) continue;
    int y = pl.p_artifact > threshold ? 1 : 0;
    if (pl.p_artifact == threshold) y = tie == TieRule::kArtifact ? 1 : 0;
    out.push_back({pl.row_id, y});
  }
  return out;
}

void to_json(nlohmann::json& j, const LabelModelParams& p) {
  j = nlohmann::json{{"theta_acc", p.theta_acc},
                     {"theta_prop", p.theta_prop},
                     {"class_balance", p.class_balance},
                     {"lf_names", p.lf_names}};
}

void from_json(const nlohmann::json& j, LabelModelParams& p) {
  try {
    p.theta_acc = j.at("theta_acc").get<std::vector<double>>();
    p.theta_prop = j.at("theta_prop").get<std::vector<double>>();
    p.class_balance = j.at("class_balance").get<double>();
    p.lf_names = j.value("lf_names", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaMismatch, std::string("bad label model parameters: ") + e.what());
  }
  check_params(p);
  if (!p.lf_names.empty() && p.lf_names.size() != p.size()) {
    throw Error(ErrorCode::kSchemaMismatch, "lf_names length differs from parameter count");
  }
}

void to_json(nlohmann::json& j, const LabelModelHyper& h) {
  j = nlohmann::json{{"lr", h.lr}, {"epochs", h.epochs}, {"l2", h.l2}, {"seed", h.seed}};
}

void from_json(const nlohmann::json& j, LabelModelHyper& h) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "label_model must be an object");
  static const std::set<std::string> known = {"lr", "epochs", "l2", "seed"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::kConfig, "unknown label_model key", key);
  }
  try {
    h.lr = j.value("lr", h.lr);
    h.epochs = j.value("epochs", h.epochs);
    h.l2 = j.value("l2", h.l2);
    h.seed = j.value("seed", h.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("bad label_model value: ") + e.what());
  }
  if (!(h.lr > 0.0) || h.epochs < 0 || !(h.l2 >= 0.0)) {
    throw Error(ErrorCode::kConfig, "label_model needs lr > 0, epochs >= 0, l2 >= 0");
  }
}

}  // namespace vitalws
