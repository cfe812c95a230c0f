#pragma once

// Random forest of depth-limited CART trees (Gini criterion, sqrt(d)
// candidate features per split, bootstrap resampling).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vitalws/features.hpp"

namespace vitalws {

struct ForestHyper {
  int trees = 1000;
  int max_depth = 5;
  bool bootstrap = true;
  std::uint64_t seed = 0;
  /// 0 = hardware concurrency. Results do not depend on it.
  std::size_t workers = 0;

  bool operator==(const ForestHyper&) const = default;
};

void to_json(nlohmann::json& j, const ForestHyper& h);
/// Reads trees, max_depth, bootstrap; unknown keys throw kConfig.
void from_json(const nlohmann::json& j, ForestHyper& h);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;   // x <= threshold
  int right = -1;  // x > threshold
  double weight[2] = {0.0, 0.0};  // bootstrap-weighted class counts

  bool leaf() const noexcept { return feature < 0; }
  double p_artifact() const noexcept { return weight[1] / (weight[0] + weight[1]); }
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  /// Weighted impurity decrease per feature, unnormalised.
  std::vector<double> impurity_decrease;

  int depth() const;
  double predict(std::span<const double> row) const;
  bool operator==(const Tree&) const = default;
};

class TrainedForest {
 public:
  TrainedForest() = default;
  TrainedForest(std::vector<std::string> feature_names, std::vector<Tree> trees, ForestHyper hyper)
      : names_(std::move(feature_names)), trees_(std::move(trees)), hyper_(hyper) {}

  const std::vector<std::string>& feature_names() const noexcept { return names_; }
  const std::vector<Tree>& trees() const noexcept { return trees_; }
  const ForestHyper& hyper() const noexcept { return hyper_; }

  /// Mean over trees of the leaf artifact fraction. Throws kSchemaMismatch
  /// when the columns differ from training.
  std::vector<double> predict_proba(const FeatureMatrix& x) const;

  bool operator==(const TrainedForest&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tree> trees_;
  ForestHyper hyper_;
};

/// Bootstrap multiplicities for one tree.
std::vector<double> bootstrap_weights(std::size_t n, std::uint64_t seed, std::size_t tree_index);

/// One CART tree on weighted rows. `feature_seed` drives candidate sampling.
Tree fit_tree(const FeatureMatrix& x, std::span<const int> y, std::span<const double> weights,
              std::uint64_t feature_seed, int max_depth);

/// Throws kSingleClass unless both classes occur, kInvalidArgument for
/// fewer than 2 rows or mismatched sizes.
TrainedForest train_random_forest(const FeatureMatrix& x, std::span<const int> y, const ForestHyper& hyper);

enum class ImportanceMode { kGini, kPermutation };

struct ImportanceEntry {
  std::string feature;
  double score = 0.0;

  bool operator==(const ImportanceEntry&) const = default;
};

/// Descending by score, ties by name. Gini scores sum to 1 (when any split
/// exists); permutation scores are mean accuracy drops over `repeats`
/// seeded column shuffles of `x`.
std::vector<ImportanceEntry> feature_importance(const TrainedForest& model, const FeatureMatrix& x,
                                                std::span<const int> y, ImportanceMode mode,
                                                int repeats = 5, std::uint64_t seed = 0);

void to_json(nlohmann::json& j, const TrainedForest& f);
void from_json(const nlohmann::json& j, TrainedForest& f);

}  // namespace vitalws
