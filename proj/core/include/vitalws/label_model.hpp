#pragma once

// Generative label model over LF votes.
//
// Each LF j contributes a factor
//   psi_j(lambda, y) = exp(acc_j * [lambda == y] + prop_j * [lambda != ABSTAIN])
// normalised over the three vote values. LFs are conditionally independent
// given y, and P(y = 1) is the supplied class balance.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vitalws/labeling.hpp"

namespace vitalws {

struct LabelModelParams {
  std::vector<double> theta_acc;
  std::vector<double> theta_prop;
  double class_balance = 0.5;  // P(artifact)
  std::vector<std::string> lf_names;

  std::size_t size() const noexcept { return theta_acc.size(); }
  bool operator==(const LabelModelParams&) const = default;
};

/// Zero weights for `m` LFs.
LabelModelParams initial_params(std::size_t m, double class_balance,
                                std::vector<std::string> lf_names = {});

struct NllResult {
  double value = 0.0;
  std::vector<double> grad_acc;
  std::vector<double> grad_prop;
};

/// Summed negative log marginal likelihood of the rows and its gradient.
/// Throws kEmptyInput for an empty matrix, kSchemaMismatch on width mismatch.
NllResult marginal_nll(const LabelModelParams& params, const VoteMatrix& m);

struct LabelModelHyper {
  double lr = 0.1;
  int epochs = 5000;
  double l2 = 1e-4;
  /// Recorded for provenance; full-batch descent draws no random numbers.
  std::uint64_t seed = 0;
};

/// Full-batch gradient descent from zero on mean NLL + l2 * |theta|^2.
/// Throws kDiverged if the loss stops being finite.
LabelModelParams fit_label_model(const VoteMatrix& m, double class_balance,
                                 const LabelModelHyper& hyper = {});

struct ProbabilisticLabel {
  std::string row_id;
  double p_artifact = 0.0;
  bool covered = false;

  bool operator==(const ProbabilisticLabel&) const = default;
};

ProbabilisticLabel posterior(const LabelModelParams& params, std::span<const Vote> row,
                             std::string row_id = {});
std::vector<ProbabilisticLabel> posteriors(const LabelModelParams& params, const VoteMatrix& m);

/// Fraction of non-abstaining votes that say ARTIFACT. Uncovered rows get
/// `class_prior`; exact ties give 0.5.
ProbabilisticLabel majority_vote(std::span<const Vote> row, double class_prior,
                                 std::string row_id = {});
std::vector<ProbabilisticLabel> majority_votes(const VoteMatrix& m, double class_prior);

enum class TieRule { kReal, kArtifact };

struct CrispLabel {
  std::string row_id;
  int y = 0;

  bool operator==(const CrispLabel&) const = default;
};

/// Drops uncovered rows; 1 iff p > threshold, p == threshold follows `tie`.
std::vector<CrispLabel> to_crisp_labels(const std::vector<ProbabilisticLabel>& probs,
                                        double threshold = 0.5, TieRule tie = TieRule::kReal);

void to_json(nlohmann::json& j, const LabelModelParams& p);
void from_json(const nlohmann::json& j, LabelModelParams& p);
void to_json(nlohmann::json& j, const LabelModelHyper& h);
void from_json(const nlohmann::json& j, LabelModelHyper& h);

}  // namespace vitalws
