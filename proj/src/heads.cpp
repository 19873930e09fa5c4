#include "tadil/heads.hpp"

#include "tadil/error.hpp"

#include <algorithm>
#include <random>
#include <string>

namespace tadil {

namespace {

bool same_bits(const MatrixXr& a, const MatrixXr& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::equal(a.data(), a.data() + a.size(), b.data());
}

bool same_bits(const VectorXr& a, const VectorXr& b) {
  return a.size() == b.size() && std::equal(a.data(), a.data() + a.size(), b.data());
}

}  // namespace

LinearHead::LinearHead(Index dim, std::uint64_t seed)
    : dim_(dim), seed_(seed), weights_(MatrixXr::Zero(1, dim)), bias_(VectorXr::Zero(1)),
      mean_(VectorXr::Zero(dim)), scale_(VectorXr::Ones(dim)) {}

void LinearHead::grow_classes(Index classes, double init_scale) {
  const Index old = weights_.rows();
  if (classes <= old) return;
  weights_.conservativeResize(classes, dim_);
  bias_.conservativeResize(classes);
  // Row r's initial weights depend only on (seed, r).
  for (Index r = old; r < classes; ++r) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                      static_cast<std::uint32_t>(r)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, init_scale);
    for (Index c = 0; c < dim_; ++c) weights_(r, c) = normal(rng);
    bias_(r) = 0.0;
  }
}

MatrixXr LinearHead::standardize(const MatrixXr& X) const {
  return ((X.rowwise() - mean_.transpose()).array().rowwise() / scale_.transpose().array()).matrix();
}

void LinearHead::fit(const MatrixXr& X, std::span<const int> labels, const HeadTraining& cfg) {
  if (X.rows() == 0 || labels.empty()) throw Error(Errc::EmptyTrainingSet, "no training samples");
  if (X.cols() != dim_) throw Error(Errc::DimensionMismatch, "training data dim differs from head");
  if (static_cast<Index>(labels.size()) != X.rows()) {
    throw Error(Errc::InvalidArgument, "one label per training row required");
  }
  if (!X.allFinite()) throw Error(Errc::NonFinite, "training data contains NaN or Inf");
  const int max_label = *std::max_element(labels.begin(), labels.end());
  if (*std::min_element(labels.begin(), labels.end()) < 0) {
    throw Error(Errc::InvalidArgument, "class labels must be >= 0");
  }

  if (!trained_) {
    mean_ = X.colwise().mean().transpose();
    const MatrixXr centered = X.rowwise() - mean_.transpose();
    scale_ = (centered.colwise().squaredNorm() / static_cast<double>(X.rows())).cwiseSqrt().transpose();
    for (Index c = 0; c < dim_; ++c) {
      if (!(scale_(c) > 1e-12)) scale_(c) = 1.0;
    }
    // Replace the placeholder class with seeded initial weights.
    weights_.resize(0, dim_);
    bias_.resize(0);
  }
  grow_classes(std::max<Index>(weights_.rows(), max_label + 1), cfg.init_scale);

  const MatrixXr Z = standardize(X);
  const auto n = static_cast<double>(X.rows());
  MatrixXr onehot = MatrixXr::Zero(X.rows(), weights_.rows());
  for (Index i = 0; i < X.rows(); ++i) onehot(i, labels[static_cast<std::size_t>(i)]) = 1.0;

  for (int it = 0; it < cfg.iterations; ++it) {
    MatrixXr logits = Z * weights_.transpose();
    logits.rowwise() += bias_.transpose();
    const VectorXr row_max = logits.rowwise().maxCoeff();
    MatrixXr prob = (logits.colwise() - row_max).array().exp().matrix();
    const VectorXr row_sum = prob.rowwise().sum();
    prob = (prob.array().colwise() / row_sum.array()).matrix();
    const MatrixXr residual = prob - onehot;
    weights_.noalias() -= (cfg.learning_rate / n) * (residual.transpose() * Z);
    bias_.noalias() -= (cfg.learning_rate / n) * residual.colwise().sum().transpose();
  }
  trained_ = true;
}

int LinearHead::infer(const VectorXr& x) const {
  if (x.size() != dim_) throw Error(Errc::DimensionMismatch, "input dim differs from head");
  const VectorXr z = ((x - mean_).array() / scale_.array()).matrix();
  const VectorXr logits = weights_ * z + bias_;
  Index best = 0;
  logits.maxCoeff(&best);
  return static_cast<int>(best);
}

double LinearHead::accuracy(const MatrixXr& X, std::span<const int> labels) const {
  if (X.rows() == 0) return 0.0;
  Index hits = 0;
  for (Index i = 0; i < X.rows(); ++i) {
    if (infer(X.row(i).transpose()) == labels[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(X.rows());
}

LinearHead LinearHead::from_parts(Index dim, std::uint64_t seed, bool trained, MatrixXr weights,
                                  VectorXr bias, VectorXr mean, VectorXr scale) {
  if (weights.cols() != dim || bias.size() != weights.rows() || mean.size() != dim ||
      scale.size() != dim) {
    throw Error(Errc::Corrupt, "head parameter shapes are inconsistent");
  }
  LinearHead h;
  h.dim_ = dim;
  h.seed_ = seed;
  h.trained_ = trained;
  h.weights_ = std::move(weights);
  h.bias_ = std::move(bias);
  h.mean_ = std::move(mean);
  h.scale_ = std::move(scale);
  return h;
}

bool operator==(const LinearHead& a, const LinearHead& b) {
  return a.dim_ == b.dim_ && a.seed_ == b.seed_ && a.trained_ == b.trained_ &&
         same_bits(a.weights_, b.weights_) && same_bits(a.bias_, b.bias_) &&
         same_bits(a.mean_, b.mean_) && same_bits(a.scale_, b.scale_);
}

void HeadRegistry::add(TaskId task, LinearHead head) {
  if (heads_.count(task)) throw Error(Errc::DuplicateTask, "head " + std::to_string(task) + " exists");
  heads_.emplace(task, std::move(head));
}

const LinearHead& HeadRegistry::at(TaskId task) const {
  auto it = heads_.find(task);
  if (it == heads_.end()) throw Error(Errc::UnknownTask, "no head for task " + std::to_string(task));
  return it->second;
}

LinearHead& HeadRegistry::at(TaskId task) {
  return const_cast<LinearHead&>(static_cast<const HeadRegistry&>(*this).at(task));
}

}  // namespace tadil
