#include "slotfill/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include "binary_io.hpp"
#include "slotfill/config.hpp"
#include "slotfill/error.hpp"
#include "slotfill/random.hpp"
#include "slotfill/text.hpp"
#include "sparse_adam.hpp"

namespace slotfill {

namespace {

constexpr std::string_view kMagic = "BENC";
constexpr std::uint32_t kVersion = 1;

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> encode_double(const EncoderParams& params, Tower tower, const SparseFeatures& x) {
  std::vector<double> out(params.d_out(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto col = params.column(tower, x.indices[i]);
    const double w = x.weights[i];
    for (std::size_t r = 0; r < out.size(); ++r) out[r] += w * static_cast<double>(col[r]);
  }
  return out;
}

double dot_double(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double dot_mixed(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

float weight_of(const SparseFeatures& x, std::uint32_t feature) {
  auto it = std::lower_bound(x.indices.begin(), x.indices.end(), feature);
  if (it == x.indices.end() || *it != feature) return 0.0f;
  return x.weights[static_cast<std::size_t>(it - x.indices.begin())];
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

struct Featurized {
  SparseFeatures query;
  SparseFeatures positive;
  SparseFeatures negative;
};

Featurized featurize_instance(const TrainingInstance& instance, std::uint32_t d_in) {
  return {featurize(instance.query.rendered, d_in), featurize(instance.positive.text, d_in),
          featurize(instance.negative.text, d_in)};
}

// Loss with one parameter coordinate shifted by `delta`, all in double.
// Each coordinate enters the scores linearly, so the shift is applied to
// the encodings directly.
double shifted_loss(const EncoderParams& params, const Featurized& x, Tower tower, std::uint32_t feature,
                    std::uint32_t row, double delta) {
  auto q = encode_double(params, Tower::kQuery, x.query);
  auto pos = encode_double(params, Tower::kPassage, x.positive);
  auto neg = encode_double(params, Tower::kPassage, x.negative);
  if (tower == Tower::kQuery) {
    q[row] += delta * weight_of(x.query, feature);
  } else {
    pos[row] += delta * weight_of(x.positive, feature);
    neg[row] += delta * weight_of(x.negative, feature);
  }
  return pair_loss(dot_double(q, pos), dot_double(q, neg));
}

}  // namespace

std::uint32_t unigram_bucket(std::string_view token, std::uint32_t d_in) {
  return hashed_bucket("u:", token, d_in);
}

std::uint32_t trigram_bucket(std::string_view gram, std::uint32_t d_in) {
  return hashed_bucket("c:", gram, d_in);
}

SparseFeatures featurize(std::string_view text, std::uint32_t d_in) {
  std::vector<std::pair<std::uint32_t, float>> entries;
  for (const auto& token : tokenize(text)) {
    const std::string_view s = token.surface;
    entries.emplace_back(unigram_bucket(s, d_in), 1.0f);
    for (std::size_t i = 0; i + 3 <= s.size(); ++i) {
      entries.emplace_back(trigram_bucket(s.substr(i, 3), d_in), 1.0f);
    }
  }
  return make_sparse(std::move(entries));
}

EncoderParams EncoderParams::zeros(std::uint32_t d_in, std::uint32_t d_out, std::uint64_t seed) {
  if (d_in == 0 || d_out == 0) throw std::invalid_argument("encoder dimensions must be positive");
  EncoderParams p;
  p.d_in_ = d_in;
  p.d_out_ = d_out;
  p.seed_ = seed;
  p.query_.assign(static_cast<std::size_t>(d_in) * d_out, 0.0f);
  p.passage_.assign(static_cast<std::size_t>(d_in) * d_out, 0.0f);
  return p;
}

EncoderParams EncoderParams::initialize(std::uint32_t d_in, std::uint32_t d_out, std::uint64_t seed) {
  EncoderParams p = zeros(d_in, d_out, seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
  Rng rng(seed);
  for (float& w : p.query_) w = static_cast<float>(rng.uniform(-bound, bound));
  for (float& w : p.passage_) w = static_cast<float>(rng.uniform(-bound, bound));
  return p;
}

std::span<float> EncoderParams::column(Tower tower, std::uint32_t feature) {
  return {weights(tower).data() + static_cast<std::size_t>(feature) * d_out_, d_out_};
}

std::span<const float> EncoderParams::column(Tower tower, std::uint32_t feature) const {
  return {weights(tower).data() + static_cast<std::size_t>(feature) * d_out_, d_out_};
}

DenseVector EncoderParams::encode(Tower tower, const SparseFeatures& features) const {
  DenseVector out(d_out_, 0.0f);
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features.indices[i] >= d_in_) throw DimensionError(d_in_, features.indices[i]);
    const auto col = column(tower, features.indices[i]);
    const float w = features.weights[i];
    for (std::size_t r = 0; r < d_out_; ++r) out[r] += w * col[r];
  }
  return out;
}

DenseVector EncoderParams::encode_query(std::string_view text) const {
  return encode(Tower::kQuery, featurize(text, d_in_));
}

DenseVector EncoderParams::encode_passage(std::string_view text) const {
  return encode(Tower::kPassage, featurize(text, d_in_));
}

void EncoderParams::save(const std::filesystem::path& path) const {
  detail::BinaryWriter w(path);
  w.magic(kMagic);
  w.u32(kVersion);
  w.u32(d_in_);
  w.u32(d_out_);
  w.u64(seed_);
  std::vector<float> row(d_in_);
  for (Tower tower : {Tower::kQuery, Tower::kPassage}) {
    const auto& m = weights(tower);
    for (std::uint32_t r = 0; r < d_out_; ++r) {
      for (std::uint32_t c = 0; c < d_in_; ++c) row[c] = m[static_cast<std::size_t>(c) * d_out_ + r];
      w.f32s(row);
    }
  }
  w.finish();
}

EncoderParams EncoderParams::load(const std::filesystem::path& path) {
  detail::BinaryReader r(path);
  r.expect_magic(kMagic);
  r.expect_version(kVersion);
  const std::uint32_t d_in = r.u32();
  const std::uint32_t d_out = r.u32();
  const std::uint64_t seed = r.u64();
  if (d_in == 0 || d_out == 0) throw FormatError(path.string() + ": zero encoder dimension");
  EncoderParams p = zeros(d_in, d_out, seed);
  std::vector<float> row(d_in);
  for (Tower tower : {Tower::kQuery, Tower::kPassage}) {
    auto& m = p.weights(tower);
    for (std::uint32_t rr = 0; rr < d_out; ++rr) {
      r.f32s(row);
      for (std::uint32_t c = 0; c < d_in; ++c) {
        if (!std::isfinite(row[c])) throw FormatError(path.string() + ": non-finite weight");
        m[static_cast<std::size_t>(c) * d_out + rr] = row[c];
      }
    }
  }
  r.expect_end();
  return p;
}

double pair_loss(double s_pos, double s_neg) {
  const double x = s_neg - s_pos;
  // softplus(x) = max(x, 0) + log1p(exp(-|x|))
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double pair_loss_slope(double s_pos, double s_neg) { return -sigmoid(s_neg - s_pos); }

InstanceScores score_instance(const EncoderParams& params, const TrainingInstance& instance) {
  const auto x = featurize_instance(instance, params.d_in());
  const auto q = encode_double(params, Tower::kQuery, x.query);
  const auto pos = encode_double(params, Tower::kPassage, x.positive);
  const auto neg = encode_double(params, Tower::kPassage, x.negative);
  if (!all_finite(q) || !all_finite(pos) || !all_finite(neg)) {
    throw DataError("non-finite encoding for query " + instance.query.query_id);
  }
  return {dot_double(q, pos), dot_double(q, neg)};
}

double nll_loss(const EncoderParams& params, const TrainingInstance& instance) {
  const auto s = score_instance(params, instance);
  return pair_loss(s.positive, s.negative);
}

double SparseColumnGradient::at(std::uint32_t feature, std::uint32_t row, std::uint32_t d_out) const {
  auto it = std::lower_bound(features.begin(), features.end(), feature);
  if (it == features.end() || *it != feature) return 0.0;
  return values[static_cast<std::size_t>(it - features.begin()) * d_out + row];
}

EncoderGradient loss_gradient(const EncoderParams& params, const TrainingInstance& instance) {
  const auto x = featurize_instance(instance, params.d_in());
  const auto q = encode_double(params, Tower::kQuery, x.query);
  const auto pos = encode_double(params, Tower::kPassage, x.positive);
  const auto neg = encode_double(params, Tower::kPassage, x.negative);
  const double s_pos = dot_double(q, pos);
  const double s_neg = dot_double(q, neg);
  const std::uint32_t d = params.d_out();

  EncoderGradient grad;
  grad.loss = pair_loss(s_pos, s_neg);
  grad.d_positive = pair_loss_slope(s_pos, s_neg);
  grad.d_negative = -grad.d_positive;

  // dL/dW_Q[:, f] = x_q[f] * (g+ p+ + g- p-)
  grad.query.features = x.query.indices;
  grad.query.values.assign(x.query.size() * d, 0.0);
  for (std::size_t i = 0; i < x.query.size(); ++i) {
    const double w = x.query.weights[i];
    for (std::uint32_t r = 0; r < d; ++r) {
      grad.query.values[i * d + r] = w * (grad.d_positive * pos[r] + grad.d_negative * neg[r]);
    }
  }

  // dL/dW_P[:, f] = (g+ x+[f] + g- x-[f]) * q
  std::map<std::uint32_t, double> passage_coeff;
  for (std::size_t i = 0; i < x.positive.size(); ++i) {
    passage_coeff[x.positive.indices[i]] += grad.d_positive * x.positive.weights[i];
  }
  for (std::size_t i = 0; i < x.negative.size(); ++i) {
    passage_coeff[x.negative.indices[i]] += grad.d_negative * x.negative.weights[i];
  }
  for (const auto& [feature, coeff] : passage_coeff) {
    grad.passage.features.push_back(feature);
    for (std::uint32_t r = 0; r < d; ++r) grad.passage.values.push_back(coeff * q[r]);
  }
  return grad;
}

double grad_check(const EncoderParams& params, const TrainingInstance& instance, double epsilon,
                  std::size_t samples, std::uint64_t seed) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("grad_check: epsilon must be positive");
  const auto x = featurize_instance(instance, params.d_in());
  const auto grad = loss_gradient(params, instance);
  const std::uint32_t d = params.d_out();

  struct Coordinate {
    Tower tower;
    std::uint32_t feature;
    std::uint32_t row;
  };
  std::vector<Coordinate> touched;
  for (auto f : grad.query.features) {
    for (std::uint32_t r = 0; r < d; ++r) touched.push_back({Tower::kQuery, f, r});
  }
  for (auto f : grad.passage.features) {
    for (std::uint32_t r = 0; r < d; ++r) touched.push_back({Tower::kPassage, f, r});
  }

  Rng rng(seed);
  std::vector<Coordinate> chosen;
  if (touched.size() <= samples) {
    chosen = touched;
  } else {
    std::vector<std::size_t> order(touched.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span(order));
    for (std::size_t i = 0; i < samples; ++i) chosen.push_back(touched[order[i]]);
  }
  // Untouched coordinates: both gradients must be exactly zero there.
  const std::set<std::uint32_t> q_set(grad.query.features.begin(), grad.query.features.end());
  const std::set<std::uint32_t> p_set(grad.passage.features.begin(), grad.passage.features.end());
  for (std::size_t attempts = 0; chosen.size() < samples && attempts < samples * 64; ++attempts) {
    const Tower tower = rng.below(2) == 0 ? Tower::kQuery : Tower::kPassage;
    const auto feature = static_cast<std::uint32_t>(rng.below(params.d_in()));
    const auto& used = tower == Tower::kQuery ? q_set : p_set;
    if (used.contains(feature)) continue;
    chosen.push_back({tower, feature, static_cast<std::uint32_t>(rng.below(d))});
  }

  double worst = 0.0;
  for (const auto& c : chosen) {
    const double analytic = (c.tower == Tower::kQuery ? grad.query : grad.passage).at(c.feature, c.row, d);
    const double numeric = (shifted_loss(params, x, c.tower, c.feature, c.row, epsilon) -
                            shifted_loss(params, x, c.tower, c.feature, c.row, -epsilon)) /
                           (2.0 * epsilon);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  return worst;
}

std::vector<std::pair<std::string, std::string>> RetrieverTrainReport::manifest(
    const RetrieverTrainConfig& config) const {
  std::vector<std::pair<std::string, std::string>> out = {
      {"lr", format_number(config.learning_rate)},
      {"batch", std::to_string(config.batch_size)},
      {"epochs", std::to_string(config.epochs)},
      {"best_epoch", std::to_string(best_epoch)},
      {"best_dev_loss", format_number(best_dev_loss)},
      {"beta1", format_number(config.beta1)},
      {"beta2", format_number(config.beta2)},
      {"adam_epsilon", format_number(config.adam_epsilon)},
      {"d_in", std::to_string(config.d_in)},
      {"d_out", std::to_string(config.d_out)},
      {"seed", std::to_string(config.seed)},
  };
  for (const auto& e : epochs) {
    const std::string prefix = "epoch." + std::to_string(e.epoch) + ".";
    out.emplace_back(prefix + "train_loss", format_number(e.train_loss));
    out.emplace_back(prefix + "dev_loss", format_number(e.dev_loss));
    out.emplace_back(prefix + "dev_hits_at_1", format_number(e.dev_hits_at_1));
  }
  return out;
}

double mean_loss(const EncoderParams& params, std::span<const TrainingInstance> instances) {
  if (instances.empty()) return 0.0;
  double total = 0.0;
  for (const auto& inst : instances) {
    const auto q = params.encode_query(inst.query.rendered);
    const auto pos = params.encode_passage(inst.positive.text);
    const auto neg = params.encode_passage(inst.negative.text);
    total += pair_loss(dot_mixed(q, pos), dot_mixed(q, neg));
  }
  return total / static_cast<double>(instances.size());
}

double dev_hits_at_1(const EncoderParams& params, std::span<const TrainingInstance> dev) {
  if (dev.empty()) return 0.0;
  std::map<std::string, std::string> pool;  // passage_id -> text
  std::map<std::string, std::pair<std::string, std::set<std::string>>> queries;
  for (const auto& inst : dev) {
    pool.emplace(inst.positive.passage_id, inst.positive.text);
    pool.emplace(inst.negative.passage_id, inst.negative.text);
    auto& entry = queries[inst.query.query_id];
    entry.first = inst.query.rendered;
    entry.second.insert(inst.positive.passage_id);
  }
  std::vector<std::string> ids;
  std::vector<DenseVector> encoded;
  for (const auto& [id, text] : pool) {
    ids.push_back(id);
    encoded.push_back(params.encode_passage(text));
  }
  std::size_t hits = 0;
  for (const auto& [query_id, entry] : queries) {
    const auto q = params.encode_query(entry.first);
    std::size_t best = 0;
    float best_score = sim(q, encoded[0]);
    for (std::size_t i = 1; i < encoded.size(); ++i) {
      const float s = sim(q, encoded[i]);
      if (s > best_score) {  // ids are ascending, so ties keep the smaller id
        best_score = s;
        best = i;
      }
    }
    if (entry.second.contains(ids[best])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(queries.size());
}

EncoderParams train_retriever(std::span<const TrainingInstance> instances,
                              std::span<const TrainingInstance> dev, const RetrieverTrainConfig& config,
                              RetrieverTrainReport* report) {
  if (instances.empty()) throw DataError("train_retriever: empty training set");
  return train_retriever(EncoderParams::initialize(config.d_in, config.d_out, config.seed), instances, dev,
                         config, report);
}

EncoderParams train_retriever(EncoderParams params, std::span<const TrainingInstance> instances,
                              std::span<const TrainingInstance> dev, const RetrieverTrainConfig& config,
                              RetrieverTrainReport* report) {
  if (instances.empty()) throw DataError("train_retriever: empty training set");
  if (config.batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
  for (const auto& inst : instances) {
    if (inst.positive.passage_id == inst.negative.passage_id) {
      throw DataError("training instance for " + inst.query.query_id + " uses " +
                      inst.positive.passage_id + " as both positive and negative");
    }
  }

  const std::uint32_t d = params.d_out();
  std::vector<Featurized> features;
  features.reserve(instances.size());
  for (const auto& inst : instances) features.push_back(featurize_instance(inst, params.d_in()));

  RetrieverTrainReport local;
  RetrieverTrainReport& rep = report != nullptr ? *report : local;
  rep = RetrieverTrainReport{};

  auto record_epoch = [&](std::size_t epoch, double train_loss) {
    RetrieverEpoch e{epoch, train_loss, mean_loss(params, dev), dev_hits_at_1(params, dev)};
    rep.epochs.push_back(e);
    return e;
  };

  EncoderParams best = params;
  {
    const auto e0 = record_epoch(0, mean_loss(params, instances));
    rep.best_epoch = 0;
    rep.best_dev_loss = e0.dev_loss;
  }

  const detail::AdamOptions adam{config.learning_rate, config.beta1, config.beta2, config.adam_epsilon};
  detail::SparseAdam adam_query(d, adam);
  detail::SparseAdam adam_passage(d, adam);
  detail::ColumnAccumulator grad_query(d);
  detail::ColumnAccumulator grad_passage(d);

  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      grad_query.clear();
      grad_passage.clear();

      for (std::size_t b = start; b < end; ++b) {
        const auto& x = features[order[b]];
        const auto q = params.encode(Tower::kQuery, x.query);
        const auto pos = params.encode(Tower::kPassage, x.positive);
        const auto neg = params.encode(Tower::kPassage, x.negative);
        const double s_pos = dot_mixed(q, pos);
        const double s_neg = dot_mixed(q, neg);
        epoch_loss += pair_loss(s_pos, s_neg);
        const auto g = static_cast<float>(pair_loss_slope(s_pos, s_neg) * scale);

        for (std::size_t i = 0; i < x.query.size(); ++i) {
          auto col = grad_query.column(x.query.indices[i]);
          const float w = g * x.query.weights[i];
          for (std::uint32_t r = 0; r < d; ++r) col[r] += w * (pos[r] - neg[r]);
        }
        for (std::size_t i = 0; i < x.positive.size(); ++i) {
          auto col = grad_passage.column(x.positive.indices[i]);
          const float w = g * x.positive.weights[i];
          for (std::uint32_t r = 0; r < d; ++r) col[r] += w * q[r];
        }
        for (std::size_t i = 0; i < x.negative.size(); ++i) {
          auto col = grad_passage.column(x.negative.indices[i]);
          const float w = -g * x.negative.weights[i];
          for (std::uint32_t r = 0; r < d; ++r) col[r] += w * q[r];
        }
      }

      adam_query.begin_step();
      adam_passage.begin_step();
      for (std::size_t i = 0; i < grad_query.features().size(); ++i) {
        const auto f = grad_query.features()[i];
        adam_query.update(f, params.column(Tower::kQuery, f), grad_query.column_at(i));
      }
      for (std::size_t i = 0; i < grad_passage.features().size(); ++i) {
        const auto f = grad_passage.features()[i];
        adam_passage.update(f, params.column(Tower::kPassage, f), grad_passage.column_at(i));
      }
    }

    const auto e = record_epoch(epoch, epoch_loss / static_cast<double>(order.size()));
    if (dev.empty() || e.dev_loss < rep.best_dev_loss) {
      rep.best_epoch = epoch;
      rep.best_dev_loss = e.dev_loss;
      best = params;
    }
  }
  return best;
}

}  // namespace slotfill
