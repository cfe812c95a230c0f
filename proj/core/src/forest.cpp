#include "vitalws/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "vitalws/error.hpp"
#include "vitalws/parallel.hpp"
#include "vitalws/rng.hpp"

namespace vitalws {

namespace {

// Column-major copy plus per-feature ranks and sort orders, shared by all trees.
struct Prepared {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> col;             // col[j * n + i]
  std::vector<std::uint32_t> rank;     // equal values share a rank
  std::vector<std::uint32_t> order;    // rows sorted by value, per feature

  double value(std::size_t j, std::size_t i) const { return col[j * n + i]; }
};

Prepared prepare(const FeatureMatrix& x) {
  Prepared p;
  p.n = x.rows;
  p.d = x.cols();
  p.col.resize(p.n * p.d);
  p.rank.resize(p.n * p.d);
  p.order.resize(p.n * p.d);
  for (std::size_t j = 0; j < p.d; ++j) {
    for (std::size_t i = 0; i < p.n; ++i) p.col[j * p.n + i] = x.at(i, j);
    auto* ord = p.order.data() + j * p.n;
    std::iota(ord, ord + p.n, 0u);
    const double* c = p.col.data() + j * p.n;
    std::stable_sort(ord, ord + p.n, [c](std::uint32_t a, std::uint32_t b) { return c[a] < c[b]; });
    std::uint32_t r = 0;
    for (std::size_t k = 0; k < p.n; ++k) {
      if (k > 0 && c[ord[k]] != c[ord[k - 1]]) ++r;
      p.rank[j * p.n + ord[k]] = r;
    }
  }
  return p;
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double proxy = -1.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Prepared& p, std::span<const int> y, std::span<const double> w, std::uint64_t seed, int max_depth)
      : p_(p), y_(y), w_(w), rng_(derived_rng({seed})), max_depth_(max_depth),
        mtry_(std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(p.d))))),
        stamp_(p.n, 0), features_(p.d) {
    std::iota(features_.begin(), features_.end(), 0);
    tree_.impurity_decrease.assign(p.d, 0.0);
  }

  Tree build() {
    std::vector<std::uint32_t> rows;
    for (std::size_t i = 0; i < p_.n; ++i) {
      if (w_[i] > 0.0) rows.push_back(static_cast<std::uint32_t>(i));
    }
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::uint32_t> rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    double wc[2] = {0.0, 0.0};
    for (const auto i : rows) wc[y_[i]] += w_[i];
    tree_.nodes[static_cast<std::size_t>(id)].weight[0] = wc[0];
    tree_.nodes[static_cast<std::size_t>(id)].weight[1] = wc[1];

    const double total = wc[0] + wc[1];
    if (depth >= max_depth_ || wc[0] == 0.0 || wc[1] == 0.0 || total < 2.0 || rows.size() < 2) return id;

    const Split s = best_split(rows, wc);
    if (s.feature < 0) return id;

    const double parent = (wc[0] * wc[0] + wc[1] * wc[1]) / total;
    tree_.impurity_decrease[static_cast<std::size_t>(s.feature)] += s.proxy - parent;

    std::vector<std::uint32_t> left, right;
    for (const auto i : rows) {
      (p_.value(static_cast<std::size_t>(s.feature), i) <= s.threshold ? left : right).push_back(i);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = s.feature;
    node.threshold = s.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  // Features are drawn without replacement until mtry of them have been
  // found non-constant in this node, or none remain.
  Split best_split(const std::vector<std::uint32_t>& rows, const double wc[2]) {
    ++stamp_value_;
    for (const auto i : rows) stamp_[i] = stamp_value_;
    const bool scan_global = rows.size() * 4 >= p_.n;

    Split best;
    std::size_t tried = 0;
    std::size_t remaining = p_.d;
    while (tried < mtry_ && remaining > 0) {
      const auto k = uniform_int<std::size_t>(rng_, 0, remaining - 1);
      std::swap(features_[k], features_[remaining - 1]);
      const std::size_t j = features_[--remaining];

      sorted_.clear();
      if (scan_global) {
        const auto* ord = p_.order.data() + j * p_.n;
        for (std::size_t k2 = 0; k2 < p_.n; ++k2) {
          if (stamp_[ord[k2]] == stamp_value_) sorted_.push_back(ord[k2]);
        }
      } else {
        sorted_.assign(rows.begin(), rows.end());
        const auto* rk = p_.rank.data() + j * p_.n;
        std::sort(sorted_.begin(), sorted_.end(), [rk](std::uint32_t a, std::uint32_t b) {
          return rk[a] != rk[b] ? rk[a] < rk[b] : a < b;
        });
      }
      const auto* rk = p_.rank.data() + j * p_.n;
      if (rk[sorted_.front()] == rk[sorted_.back()]) continue;  // constant here
      ++tried;

      double left[2] = {0.0, 0.0};
      for (std::size_t k2 = 0; k2 + 1 < sorted_.size(); ++k2) {
        const auto i = sorted_[k2];
        left[y_[i]] += w_[i];
        const auto next = sorted_[k2 + 1];
        if (rk[i] == rk[next]) continue;
        const double wl = left[0] + left[1];
        const double r0 = wc[0] - left[0];
        const double r1 = wc[1] - left[1];
        const double wr = r0 + r1;
        const double proxy = (left[0] * left[0] + left[1] * left[1]) / wl + (r0 * r0 + r1 * r1) / wr;
        if (proxy > best.proxy) {
          const double lo = p_.value(j, i);
          const double hi = p_.value(j, next);
          double thr = lo + (hi - lo) / 2.0;
          if (!(thr < hi)) thr = lo;
          best = {static_cast<int>(j), thr, proxy};
        }
      }
    }
    return best;
  }

  const Prepared& p_;
  std::span<const int> y_;
  std::span<const double> w_;
  Rng rng_;
  int max_depth_;
  std::size_t mtry_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t stamp_value_ = 0;
  std::vector<std::size_t> features_;
  std::vector<std::uint32_t> sorted_;
  Tree tree_;
};

void check_training_input(const FeatureMatrix& x, std::span<const int> y) {
  if (x.values.size() != x.rows * x.cols()) throw Error(ErrorCode::kInvalidArgument, "feature matrix is not rectangular");
  if (y.size() != x.rows) throw Error(ErrorCode::kInvalidArgument, "label count differs from feature rows");
  if (x.rows < 2) throw Error(ErrorCode::kInvalidArgument, "random forest needs at least 2 rows");
  if (x.cols() == 0) throw Error(ErrorCode::kInvalidArgument, "random forest needs at least one feature");
  bool seen[2] = {false, false};
  for (const int v : y) {
    if (v != 0 && v != 1) throw Error(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
    seen[v] = true;
  }
  if (!seen[0] || !seen[1]) throw Error(ErrorCode::kSingleClass, "training labels contain a single class");
}

void check_schema(const std::vector<std::string>& trained, const FeatureMatrix& x) {
  if (trained != x.names) throw Error(ErrorCode::kSchemaMismatch, "feature columns differ from the trained model");
}

double accuracy(std::span<const double> p, std::span<const int> y) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hit += (p[i] > 0.5 ? 1 : 0) == y[i];
  return static_cast<double>(hit) / static_cast<double>(y.size());
}

std::vector<ImportanceEntry> ranked(const std::vector<std::string>& names, const std::vector<double>& scores) {
  std::vector<ImportanceEntry> out;
  for (std::size_t j = 0; j < names.size(); ++j) out.push_back({names[j], scores[j]});
  std::sort(out.begin(), out.end(), [](const ImportanceEntry& a, const ImportanceEntry& b) {
    return a.score != b.score ? a.score > b.score : a.feature < b.feature;
  });
  return out;
}

}  // namespace

int Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> level(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    deepest = std::max(deepest, level[k]);
    if (!nodes[k].leaf()) {
      level[static_cast<std::size_t>(nodes[k].left)] = level[k] + 1;
      level[static_cast<std::size_t>(nodes[k].right)] = level[k] + 1;
    }
  }
  return deepest;
}

double Tree::predict(std::span<const double> row) const {
  std::size_t k = 0;
  while (!nodes[k].leaf()) {
    const auto& n = nodes[k];
    k = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[k].p_artifact();
}

std::vector<double> TrainedForest::predict_proba(const FeatureMatrix& x) const {
  check_schema(names_, x);
  std::vector<double> out(x.rows, 0.0);
  for (const auto& t : trees_) {
    for (std::size_t i = 0; i < x.rows; ++i) {
      out[i] += t.predict({x.values.data() + i * x.cols(), x.cols()});
    }
  }
  const auto n = static_cast<double>(trees_.size());
  for (auto& v : out) v /= n;
  return out;
}

std::vector<double> bootstrap_weights(std::size_t n, std::uint64_t seed, std::size_t tree_index) {
  auto rng = derived_rng({seed, 0x626f6f74u, tree_index});
  std::vector<double> w(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) w[uniform_int<std::size_t>(rng, 0, n - 1)] += 1.0;
  return w;
}

Tree fit_tree(const FeatureMatrix& x, std::span<const int> y, std::span<const double> weights,
              std::uint64_t feature_seed, int max_depth) {
  if (weights.size() != x.rows || y.size() != x.rows) {
    throw Error(ErrorCode::kInvalidArgument, "weights and labels must match the feature rows");
  }
  const auto p = prepare(x);
  return TreeBuilder(p, y, weights, feature_seed, max_depth).build();
}

TrainedForest train_random_forest(const FeatureMatrix& x, std::span<const int> y, const ForestHyper& hyper) {
  check_training_input(x, y);
  if (hyper.trees < 1 || hyper.max_depth < 0) throw Error(ErrorCode::kInvalidArgument, "need trees >= 1, max_depth >= 0");
  const auto p = prepare(x);
  std::vector<Tree> trees(static_cast<std::size_t>(hyper.trees));
  parallel_for(trees.size(), hyper.workers, [&](std::size_t t) {
    const auto w = hyper.bootstrap ? bootstrap_weights(x.rows, hyper.seed, t) : std::vector<double>(x.rows, 1.0);
    const std::uint64_t feature_seed = derived_rng({hyper.seed, 0x74726565u, t})();
    trees[t] = TreeBuilder(p, y, w, feature_seed, hyper.max_depth).build();
  });
  return TrainedForest(x.names, std::move(trees), hyper);
}

std::vector<ImportanceEntry> feature_importance(const TrainedForest& model, const FeatureMatrix& x,
                                                std::span<const int> y, ImportanceMode mode, int repeats,
                                                std::uint64_t seed) {
  check_schema(model.feature_names(), x);
  const std::size_t d = x.cols();
  std::vector<double> score(d, 0.0);

  if (mode == ImportanceMode::kGini) {
    for (const auto& t : model.trees()) {
      const double s = std::accumulate(t.impurity_decrease.begin(), t.impurity_decrease.end(), 0.0);
      if (s <= 0.0) continue;
      for (std::size_t j = 0; j < d; ++j) score[j] += t.impurity_decrease[j] / s;
    }
    const double total = std::accumulate(score.begin(), score.end(), 0.0);
    if (total > 0.0) {
      for (auto& v : score) v /= total;
    }
    return ranked(model.feature_names(), score);
  }

  if (y.size() != x.rows) throw Error(ErrorCode::kInvalidArgument, "label count differs from feature rows");
  if (repeats < 1) throw Error(ErrorCode::kInvalidArgument, "permutation importance needs repeats >= 1");
  const auto& trees = model.trees();
  const std::size_t n = x.rows;
  const auto n_trees = static_cast<double>(trees.size());

  // Per-tree leaf values so each shuffle re-evaluates only trees using the column.
  std::vector<double> leaf(trees.size() * n);
  std::vector<double> base(n, 0.0);
  for (std::size_t t = 0; t < trees.size(); ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      leaf[t * n + i] = trees[t].predict({x.values.data() + i * d, d});
      base[i] += leaf[t * n + i];
    }
  }
  std::vector<double> base_p(base);
  for (auto& v : base_p) v /= n_trees;
  const double base_acc = accuracy(base_p, y);

  parallel_for(d, model.hyper().workers, [&](std::size_t j) {
    std::vector<std::size_t> users;
    for (std::size_t t = 0; t < trees.size(); ++t) {
      for (const auto& node : trees[t].nodes) {
        if (node.feature == static_cast<int>(j)) {
          users.push_back(t);
          break;
        }
      }
    }
    std::vector<double> row(d);
    std::vector<double> sum(n);
    std::vector<std::size_t> perm(n);
    double drop = 0.0;
    for (int r = 0; r < repeats; ++r) {
      std::iota(perm.begin(), perm.end(), 0);
      auto rng = derived_rng({seed, j, static_cast<std::uint64_t>(r)});
      shuffle(perm, rng);
      sum = base;
      for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(x.values.data() + i * d, d, row.begin());
        row[j] = x.at(perm[i], j);
        for (const auto t : users) sum[i] += trees[t].predict(row) - leaf[t * n + i];
      }
      for (auto& v : sum) v /= n_trees;
      drop += base_acc - accuracy(sum, y);
    }
    score[j] = drop / repeats;
  });
  return ranked(model.feature_names(), score);
}

void to_json(nlohmann::json& j, const ForestHyper& h) {
  j = nlohmann::json{{"trees", h.trees}, {"max_depth", h.max_depth}, {"bootstrap", h.bootstrap}};
}

void from_json(const nlohmann::json& j, ForestHyper& h) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "forest must be an object");
  static const std::set<std::string> known = {"trees", "max_depth", "bootstrap"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::kConfig, "unknown forest key", key);
  }
  try {
    h.trees = j.value("trees", h.trees);
    h.max_depth = j.value("max_depth", h.max_depth);
    h.bootstrap = j.value("bootstrap", h.bootstrap);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("bad forest value: ") + e.what());
  }
  if (h.trees < 1 || h.max_depth < 0) throw Error(ErrorCode::kConfig, "forest needs trees >= 1, max_depth >= 0");
}

void to_json(nlohmann::json& j, const TrainedForest& f) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : f.trees()) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes) {
      nlohmann::json node{{"counts", {n.weight[0], n.weight[1]}}};
      if (!n.leaf()) {
        node["feature"] = f.feature_names()[static_cast<std::size_t>(n.feature)];
        node["threshold"] = n.threshold;
        node["left"] = n.left;
        node["right"] = n.right;
      }
      nodes.push_back(std::move(node));
    }
    trees.push_back({{"nodes", std::move(nodes)}, {"impurity_decrease", t.impurity_decrease}});
  }
  j = nlohmann::json{{"feature_names", f.feature_names()},
                     {"hyper", f.hyper()},
                     {"seed", f.hyper().seed},
                     {"trees", std::move(trees)}};
}

void from_json(const nlohmann::json& j, TrainedForest& f) {
  try {
    const auto names = j.at("feature_names").get<std::vector<std::string>>();
    auto hyper = j.at("hyper").get<ForestHyper>();
    hyper.seed = j.at("seed").get<std::uint64_t>();
    std::vector<Tree> trees;
    for (const auto& jt : j.at("trees")) {
      Tree t;
      t.impurity_decrease = jt.at("impurity_decrease").get<std::vector<double>>();
      for (const auto& jn : jt.at("nodes")) {
        TreeNode n;
        const auto counts = jn.at("counts").get<std::vector<double>>();
        n.weight[0] = counts.at(0);
        n.weight[1] = counts.at(1);
        if (jn.contains("feature")) {
          const auto name = jn.at("feature").get<std::string>();
          const auto it = std::find(names.begin(), names.end(), name);
          if (it == names.end()) throw Error(ErrorCode::kSchemaMismatch, "tree splits on an unknown feature", name);
          n.feature = static_cast<int>(it - names.begin());
          n.threshold = jn.at("threshold").get<double>();
          n.left = jn.at("left").get<int>();
          n.right = jn.at("right").get<int>();
        }
        t.nodes.push_back(n);
      }
      trees.push_back(std::move(t));
    }
    f = TrainedForest(names, std::move(trees), hyper);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaMismatch, std::string("bad forest dump: ") + e.what());
  }
}

}  // namespace vitalws
