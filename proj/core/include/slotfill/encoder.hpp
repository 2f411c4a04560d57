#pragma once

/// \file encoder.hpp
/// \brief Trainable bi-encoder over hashed text features.
///
/// Text is featurized into d_in hashed buckets (token unigrams plus the
/// character 3-grams of each token) and mapped to d_out dimensions by one of
/// two independent linear maps: W_Q for queries, W_P for passages. Training
/// minimizes the two-way softmax loss over (query, positive, negative)
/// triples:
///
///   L = -log(e^{s+} / (e^{s+} + e^{s-})) = softplus(s- - s+),
///   s = <W_Q x_q, W_P x_p>.
///
/// Weights are stored feature-major (the d_out weights of one input feature
/// are contiguous), which is the access pattern of sparse encoding.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "slotfill/corpus.hpp"
#include "slotfill/dense_index.hpp"
#include "slotfill/features.hpp"
#include "slotfill/query.hpp"

namespace slotfill {

inline constexpr std::uint32_t kDefaultEncoderInputDim = 1u << 18;
inline constexpr std::uint32_t kDefaultEncoderOutputDim = 256;

/// Unigram key "u:" + token, 3-gram key "c:" + gram; weights are occurrence
/// counts. Tokens shorter than three characters contribute no 3-grams.
std::uint32_t unigram_bucket(std::string_view token, std::uint32_t d_in);
std::uint32_t trigram_bucket(std::string_view gram, std::uint32_t d_in);
SparseFeatures featurize(std::string_view text, std::uint32_t d_in = kDefaultEncoderInputDim);

enum class Tower { kQuery, kPassage };

class EncoderParams {
 public:
  EncoderParams() = default;

  /// Uniform in [-1/sqrt(d_in), 1/sqrt(d_in)], drawn from `seed`.
  static EncoderParams initialize(std::uint32_t d_in, std::uint32_t d_out, std::uint64_t seed);
  static EncoderParams zeros(std::uint32_t d_in, std::uint32_t d_out, std::uint64_t seed = 0);

  std::uint32_t d_in() const noexcept { return d_in_; }
  std::uint32_t d_out() const noexcept { return d_out_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// The d_out weights applied to input feature `feature`.
  std::span<float> column(Tower tower, std::uint32_t feature);
  std::span<const float> column(Tower tower, std::uint32_t feature) const;

  DenseVector encode(Tower tower, const SparseFeatures& features) const;
  DenseVector encode_query(std::string_view text) const;
  DenseVector encode_passage(std::string_view text) const;

  /// "BENC", u32 version, u32 d_in, u32 d_out, u64 seed, then W_Q and W_P
  /// as d_out rows of d_in little-endian f32 each.
  void save(const std::filesystem::path& path) const;
  static EncoderParams load(const std::filesystem::path& path);

  bool operator==(const EncoderParams&) const = default;

 private:
  std::vector<float>& weights(Tower tower) { return tower == Tower::kQuery ? query_ : passage_; }
  const std::vector<float>& weights(Tower tower) const {
    return tower == Tower::kQuery ? query_ : passage_;
  }

  std::uint32_t d_in_ = 0;
  std::uint32_t d_out_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<float> query_;
  std::vector<float> passage_;
};

/// (q, p+, p-). The positive and negative differ by passage_id.
struct TrainingInstance {
  SlotQuery query;
  Passage positive;
  Passage negative;
};

/// softplus(s_neg - s_pos), evaluated without overflow.
double pair_loss(double s_pos, double s_neg);
/// dL/ds+ = -sigmoid(s_neg - s_pos); dL/ds- is its negation.
double pair_loss_slope(double s_pos, double s_neg);

struct InstanceScores {
  double positive = 0.0;
  double negative = 0.0;
};

/// Scores in double precision. Throws DataError on non-finite encodings.
InstanceScores score_instance(const EncoderParams& params, const TrainingInstance& instance);
double nll_loss(const EncoderParams& params, const TrainingInstance& instance);

/// Gradient restricted to the columns it touches.
struct SparseColumnGradient {
  std::vector<std::uint32_t> features;  // ascending
  std::vector<double> values;           // features.size() * d_out

  /// Zero when the feature is not present.
  double at(std::uint32_t feature, std::uint32_t row, std::uint32_t d_out) const;
};

struct EncoderGradient {
  double loss = 0.0;
  double d_positive = 0.0;  // dL/ds+
  double d_negative = 0.0;  // dL/ds-
  SparseColumnGradient query;
  SparseColumnGradient passage;
};

EncoderGradient loss_gradient(const EncoderParams& params, const TrainingInstance& instance);

/// Largest relative error between the analytic gradient and central finite
/// differences over at least `samples` coordinates. Coordinates are drawn
/// from the touched columns first; untouched ones fill the remainder.
/// Relative error is |a - n| / max(|a|, |n|, 1e-6). Throws
/// std::invalid_argument for epsilon <= 0.
double grad_check(const EncoderParams& params, const TrainingInstance& instance, double epsilon,
                  std::size_t samples = 200, std::uint64_t seed = 0);

struct RetrieverTrainConfig {
  std::uint32_t d_in = kDefaultEncoderInputDim;
  std::uint32_t d_out = kDefaultEncoderOutputDim;
  double learning_rate = 3e-5;
  std::size_t batch_size = 32;
  std::size_t epochs = 40;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
};

struct RetrieverEpoch {
  std::size_t epoch = 0;  // 0 = initial parameters
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double dev_hits_at_1 = 0.0;
};

struct RetrieverTrainReport {
  std::vector<RetrieverEpoch> epochs;
  std::size_t best_epoch = 0;
  double best_dev_loss = 0.0;

  /// key=value lines: lr, batch, epochs, best_epoch, best_dev_loss, ...
  std::vector<std::pair<std::string, std::string>> manifest(const RetrieverTrainConfig& config) const;
};

/// Mean pair loss over `instances` using the float encoding path.
double mean_loss(const EncoderParams& params, std::span<const TrainingInstance> instances);

/// Ranks the union of all positive and negative passages in `dev` for each
/// distinct query; a hit is a top-1 passage that is one of the query's
/// positives.
double dev_hits_at_1(const EncoderParams& params, std::span<const TrainingInstance> dev);

/// Minibatch Adam on the mean batch loss. Moments are kept only for input
/// features that have received a gradient, and each step updates only the
/// features present in its batch. Returns the checkpoint (epoch 0 = the
/// initial parameters) with the lowest dev loss; with an empty dev set the
/// last epoch wins. Deterministic given config.seed.
EncoderParams train_retriever(std::span<const TrainingInstance> instances,
                              std::span<const TrainingInstance> dev, const RetrieverTrainConfig& config,
                              RetrieverTrainReport* report = nullptr);
EncoderParams train_retriever(EncoderParams initial, std::span<const TrainingInstance> instances,
                              std::span<const TrainingInstance> dev, const RetrieverTrainConfig& config,
                              RetrieverTrainReport* report = nullptr);

}  // namespace slotfill
