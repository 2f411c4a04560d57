#include "slotfill/reader.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "binary_io.hpp"
#include "slotfill/config.hpp"
#include "slotfill/error.hpp"
#include "slotfill/eval.hpp"
#include "slotfill/random.hpp"
#include "slotfill/text.hpp"
#include "sparse_adam.hpp"

namespace slotfill {

namespace {

constexpr std::string_view kMagic = "BRDR";
constexpr std::uint32_t kVersion = 1;

using TokenFeatures = std::vector<std::vector<std::uint32_t>>;

std::set<std::string> query_token_set(std::string_view query) {
  std::string text(query);
  for (std::size_t pos = text.find("[SEP]"); pos != std::string::npos; pos = text.find("[SEP]", pos)) {
    text.replace(pos, 5, " ");
  }
  const auto words = tokenize_words(text);
  return {words.begin(), words.end()};
}

double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

// Logits [null, token_0, ...] in double, optionally with one weight shifted.
struct Shift {
  int which = -1;  // 0 start, 1 end, 2 null
  std::uint32_t feature = 0;
  double delta = 0.0;
};

std::vector<double> logits(const ReaderParams& params, const TokenFeatures& feats, bool start, const Shift& shift) {
  const auto& w = start ? params.start_weights() : params.end_weights();
  std::vector<double> z(feats.size() + 1);
  z[0] = params.null_weight() + (shift.which == 2 ? shift.delta : 0.0);
  const int tower = start ? 0 : 1;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    double s = 0.0;
    for (auto f : feats[i]) {
      s += w[f];
      if (shift.which == tower && f == shift.feature) s += shift.delta;
    }
    z[i + 1] = s;
  }
  return z;
}

std::pair<std::size_t, std::size_t> targets(const ReaderExample& ex) {
  if (!ex.span) return {0, 0};
  return {ex.span->first + 1, ex.span->second + 1};
}

double loss_from(const ReaderParams& params, const TokenFeatures& feats, const ReaderExample& ex,
                 const Shift& shift = {}) {
  const auto [gs, ge] = targets(ex);
  const auto zs = logits(params, feats, true, shift);
  const auto ze = logits(params, feats, false, shift);
  return (log_sum_exp(zs) - zs[gs]) + (log_sum_exp(ze) - ze[ge]);
}

void validate_example(const ReaderExample& ex) {
  if (ex.passage.tokens.empty()) throw DataError("reader example " + ex.example_id + " has an empty passage");
  if (ex.span) {
    const auto [s, e] = *ex.span;
    if (s > e || e >= ex.passage.tokens.size()) {
      throw DataError("reader example " + ex.example_id + ": gold span [" + std::to_string(s) + ", " +
                      std::to_string(e) + "] outside passage of " + std::to_string(ex.passage.tokens.size()) +
                      " tokens");
    }
  }
}

// Accumulates d(loss)/d(logit) into per-feature gradients.
struct GradientSink {
  std::map<std::uint32_t, double> start;
  std::map<std::uint32_t, double> end;
  double null = 0.0;
};

double accumulate_gradient(const ReaderParams& params, const TokenFeatures& feats, const ReaderExample& ex,
                           double scale, GradientSink& sink) {
  const auto [gs, ge] = targets(ex);
  double loss = 0.0;
  for (int pass = 0; pass < 2; ++pass) {
    const bool start = pass == 0;
    const std::size_t gold = start ? gs : ge;
    const auto z = logits(params, feats, start, {});
    const double lse = log_sum_exp(z);
    loss += lse - z[gold];
    auto& target = start ? sink.start : sink.end;
    for (std::size_t j = 0; j < z.size(); ++j) {
      const double d = (std::exp(z[j] - lse) - (j == gold ? 1.0 : 0.0)) * scale;
      if (j == 0) {
        sink.null += d;
      } else {
        for (auto f : feats[j - 1]) target[f] += d;
      }
    }
  }
  return loss;
}

std::vector<std::string> gold_answers(const ReaderExample& ex) {
  if (!ex.answers.empty()) return ex.answers;
  if (ex.span) return {join_tokens(ex.passage.tokens, ex.span->first, ex.span->second + 1)};
  return {};
}

}  // namespace

ReaderParams ReaderParams::initialize(std::uint32_t d_feat, std::uint64_t seed, double init_scale) {
  if (d_feat == 0) throw std::invalid_argument("reader feature dimension must be positive");
  ReaderParams p;
  p.d_feat_ = d_feat;
  p.seed_ = seed;
  p.start_.assign(d_feat, 0.0f);
  p.end_.assign(d_feat, 0.0f);
  if (init_scale > 0.0) {
    Rng rng(seed);
    for (float& w : p.start_) w = static_cast<float>(rng.uniform(-init_scale, init_scale));
    for (float& w : p.end_) w = static_cast<float>(rng.uniform(-init_scale, init_scale));
  }
  return p;
}

void ReaderParams::save(const std::filesystem::path& path) const {
  detail::BinaryWriter w(path);
  w.magic(kMagic);
  w.u32(kVersion);
  w.u32(d_feat_);
  w.u64(seed_);
  w.f32(null_);
  w.f32s(start_);
  w.f32s(end_);
  w.finish();
}

ReaderParams ReaderParams::load(const std::filesystem::path& path) {
  detail::BinaryReader r(path);
  r.expect_magic(kMagic);
  r.expect_version(kVersion);
  ReaderParams p;
  p.d_feat_ = r.u32();
  if (p.d_feat_ == 0) throw FormatError(path.string() + ": zero feature dimension");
  p.seed_ = r.u64();
  p.null_ = r.f32();
  p.start_.resize(p.d_feat_);
  p.end_.resize(p.d_feat_);
  r.f32s(p.start_);
  r.f32s(p.end_);
  r.expect_end();
  return p;
}

std::vector<std::vector<std::uint32_t>> token_features(std::string_view query, const Passage& passage,
                                                       std::uint32_t d_feat) {
  const auto q = query_token_set(query);
  const auto& tokens = passage.tokens;
  const std::size_t n = tokens.size();
  auto word = [&](std::ptrdiff_t i) -> std::string_view {
    if (i < 0) return "<s>";
    if (static_cast<std::size_t>(i) >= n) return "</s>";
    return tokens[static_cast<std::size_t>(i)].surface;
  };
  auto in_query = [&](std::ptrdiff_t i) {
    return i >= 0 && static_cast<std::size_t>(i) < n && q.contains(tokens[static_cast<std::size_t>(i)].surface);
  };

  TokenFeatures out(n);
  for (std::size_t u = 0; u < n; ++u) {
    const auto i = static_cast<std::ptrdiff_t>(u);
    auto& f = out[u];
    f.push_back(hashed_bucket("bias", "", d_feat));
    f.push_back(hashed_bucket("w:", word(i), d_feat));
    f.push_back(hashed_bucket("p:", word(i - 1), d_feat));
    f.push_back(hashed_bucket("p2:", word(i - 2), d_feat));
    f.push_back(hashed_bucket("n:", word(i + 1), d_feat));
    if (in_query(i)) f.push_back(hashed_bucket("inq", "", d_feat));
    if (in_query(i - 1)) f.push_back(hashed_bucket("pinq", "", d_feat));
    if (in_query(i - 2)) f.push_back(hashed_bucket("p2inq", "", d_feat));
    if (in_query(i + 1)) f.push_back(hashed_bucket("ninq", "", d_feat));
    for (const auto& qt : q) {
      f.push_back(hashed_bucket("qw:", qt + "|" + std::string(word(i)), d_feat));
      f.push_back(hashed_bucket("qp:", qt + "|" + std::string(word(i - 1)), d_feat));
    }
    std::sort(f.begin(), f.end());
    f.erase(std::unique(f.begin(), f.end()), f.end());
  }
  return out;
}

SpanScores score_spans(const ReaderParams& params, std::string_view query, const Passage& passage) {
  const auto feats = token_features(query, passage, params.d_feat());
  SpanScores s;
  s.start_scores.reserve(feats.size());
  s.end_scores.reserve(feats.size());
  for (const auto& f : feats) {
    double a = 0.0;
    double b = 0.0;
    for (auto idx : f) {
      a += params.start_weights()[idx];
      b += params.end_weights()[idx];
    }
    s.start_scores.push_back(a);
    s.end_scores.push_back(b);
  }
  s.null_score = 2.0 * static_cast<double>(params.null_weight());
  return s;
}

std::vector<SpanCandidate> decode_spans(const SpanScores& scores, const DecodeOptions& options) {
  if (options.top_k == 0 || options.max_span_len == 0) {
    throw std::invalid_argument("top_k and max_span_len must be >= 1");
  }
  const std::size_t n = std::min(scores.start_scores.size(), scores.end_scores.size());
  const double threshold = scores.null_score + options.null_margin;
  std::vector<SpanCandidate> candidates;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t e = s; e < n && e < s + options.max_span_len; ++e) {
      const double score = scores.start_scores[s] + scores.end_scores[e];
      if (score > threshold) candidates.push_back({s, e, score});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const SpanCandidate& a, const SpanCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.start != b.start) return a.start < b.start;
    return a.end < b.end;
  });
  std::vector<SpanCandidate> kept;
  for (const auto& c : candidates) {
    if (kept.size() == options.top_k) break;
    const bool overlaps = std::any_of(kept.begin(), kept.end(), [&](const SpanCandidate& k) {
      return c.start <= k.end && k.start <= c.end;
    });
    if (!overlaps) kept.push_back(c);
  }
  return kept;
}

std::vector<SpanAnswer> decode_answers(const SpanScores& scores, const Passage& passage,
                                       const DecodeOptions& options) {
  std::vector<SpanAnswer> answers;
  for (const auto& c : decode_spans(scores, options)) {
    answers.push_back(SpanAnswer{join_tokens(passage.tokens, c.start, c.end + 1), c.start, c.end, c.score,
                                 passage.passage_id});
  }
  return answers;
}

double reader_loss(const ReaderParams& params, const ReaderExample& example) {
  validate_example(example);
  return loss_from(params, token_features(example.query, example.passage, params.d_feat()), example);
}

ReaderGradient reader_loss_gradient(const ReaderParams& params, const ReaderExample& example) {
  validate_example(example);
  const auto feats = token_features(example.query, example.passage, params.d_feat());
  GradientSink sink;
  ReaderGradient g;
  g.loss = accumulate_gradient(params, feats, example, 1.0, sink);
  g.start.assign(sink.start.begin(), sink.start.end());
  g.end.assign(sink.end.begin(), sink.end.end());
  g.null = sink.null;
  return g;
}

double reader_grad_check(const ReaderParams& params, const ReaderExample& example, double epsilon,
                         std::size_t samples, std::uint64_t seed) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("reader_grad_check: epsilon must be positive");
  validate_example(example);
  const auto feats = token_features(example.query, example.passage, params.d_feat());
  const auto grad = reader_loss_gradient(params, example);

  std::vector<std::pair<Shift, double>> coords;  // (coordinate, analytic)
  coords.push_back({Shift{2, 0, 0.0}, grad.null});
  for (const auto& [f, v] : grad.start) coords.push_back({Shift{0, f, 0.0}, v});
  for (const auto& [f, v] : grad.end) coords.push_back({Shift{1, f, 0.0}, v});

  Rng rng(seed);
  std::set<std::uint32_t> used;
  for (const auto& t : feats) used.insert(t.begin(), t.end());
  for (std::size_t attempts = 0; coords.size() < samples && attempts < samples * 64; ++attempts) {
    const auto f = static_cast<std::uint32_t>(rng.below(params.d_feat()));
    if (used.contains(f)) continue;
    coords.push_back({Shift{static_cast<int>(rng.below(2)), f, 0.0}, 0.0});
  }

  double worst = 0.0;
  for (auto [shift, analytic] : coords) {
    shift.delta = epsilon;
    const double up = loss_from(params, feats, example, shift);
    shift.delta = -epsilon;
    const double down = loss_from(params, feats, example, shift);
    const double numeric = (up - down) / (2.0 * epsilon);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  return worst;
}

std::vector<std::pair<std::string, std::string>> ReaderTrainReport::manifest(const ReaderTrainConfig& config) const {
  std::vector<std::pair<std::string, std::string>> out = {
      {"lr", format_number(config.learning_rate)},
      {"batch", std::to_string(config.batch_size)},
      {"epochs", std::to_string(config.epochs)},
      {"best_epoch", std::to_string(best_epoch)},
      {"best_dev_overall", format_number(best_dev_overall)},
      {"d_feat", std::to_string(config.d_feat)},
      {"seed", std::to_string(config.seed)},
      {"max_span_len", std::to_string(config.decode.max_span_len)},
      {"null_margin", format_number(config.decode.null_margin)},
  };
  for (const auto& e : epochs) {
    const std::string prefix = "epoch." + std::to_string(e.epoch) + ".";
    out.emplace_back(prefix + "train_loss", format_number(e.train_loss));
    out.emplace_back(prefix + "dev_exact_match", format_number(e.dev_exact_match));
    out.emplace_back(prefix + "dev_no_answer_accuracy", format_number(e.dev_no_answer_accuracy));
  }
  return out;
}

std::vector<std::string> predict_top_answers(const ReaderParams& params, std::span<const ReaderExample> examples,
                                             const DecodeOptions& options) {
  std::vector<std::string> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    const auto answers = decode_answers(score_spans(params, ex.query, ex.passage), ex.passage, options);
    out.push_back(answers.empty() ? std::string() : answers.front().text);
  }
  return out;
}

ReaderDevScores evaluate_reader(const ReaderParams& params, std::span<const ReaderExample> examples,
                                const DecodeOptions& options) {
  ReaderDevScores s;
  const auto predictions = predict_top_answers(params, examples, options);
  double em = 0.0;
  double f1 = 0.0;
  std::size_t empty_ok = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].span) {
      const auto golds = gold_answers(examples[i]);
      em += exact_match(predictions[i], golds);
      f1 += token_f1(predictions[i], golds);
      ++s.answerable;
    } else {
      ++s.unanswerable;
      if (predictions[i].empty()) ++empty_ok;
    }
  }
  if (s.answerable > 0) {
    s.exact_match = em / static_cast<double>(s.answerable);
    s.f1 = f1 / static_cast<double>(s.answerable);
  }
  if (s.unanswerable > 0) s.no_answer_accuracy = static_cast<double>(empty_ok) / static_cast<double>(s.unanswerable);
  if (!examples.empty()) s.overall = (em + static_cast<double>(empty_ok)) / static_cast<double>(examples.size());
  return s;
}

std::vector<double> default_null_margin_grid() {
  std::vector<double> grid;
  for (int i = -40; i <= 40; ++i) grid.push_back(0.25 * i);
  return grid;
}

double select_null_margin(const ReaderParams& params, std::span<const ReaderExample> dev,
                          const DecodeOptions& options, std::span<const double> candidates) {
  if (candidates.empty()) return options.null_margin;
  std::vector<double> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  double best_margin = sorted.front();
  double best_score = -1.0;
  for (double m : sorted) {
    DecodeOptions o = options;
    o.null_margin = m;
    const double score = evaluate_reader(params, dev, o).overall;
    if (score > best_score) {
      best_score = score;
      best_margin = m;
    }
  }
  return best_margin;
}

ReaderParams train_reader(std::span<const ReaderExample> examples, std::span<const ReaderExample> dev,
                          const ReaderTrainConfig& config, ReaderTrainReport* report) {
  for (const auto& ex : examples) validate_example(ex);
  if (config.batch_size == 0) throw std::invalid_argument("batch size must be >= 1");

  ReaderParams params = ReaderParams::initialize(config.d_feat, config.seed, config.init_scale);
  std::vector<TokenFeatures> feats;
  feats.reserve(examples.size());
  for (const auto& ex : examples) feats.push_back(token_features(ex.query, ex.passage, params.d_feat()));

  ReaderTrainReport local;
  ReaderTrainReport& rep = report != nullptr ? *report : local;
  rep = ReaderTrainReport{};

  auto record = [&](std::size_t epoch, double train_loss) {
    const auto s = evaluate_reader(params, dev, config.decode);
    rep.epochs.push_back({epoch, train_loss, s.exact_match, s.f1, s.no_answer_accuracy, s.overall});
    return rep.epochs.back();
  };

  double initial_loss = 0.0;
  for (std::size_t i = 0; i < examples.size(); ++i) initial_loss += loss_from(params, feats[i], examples[i]);
  const auto e0 = record(0, examples.empty() ? 0.0 : initial_loss / static_cast<double>(examples.size()));
  rep.best_epoch = 0;
  rep.best_dev_overall = e0.dev_overall;
  ReaderParams best = params;
  if (examples.empty()) return best;

  const detail::AdamOptions adam{config.learning_rate, config.beta1, config.beta2, config.adam_epsilon};
  detail::SparseAdam adam_start(1, adam);
  detail::SparseAdam adam_end(1, adam);
  detail::SparseAdam adam_null(1, adam);

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(config.seed ^ 0x5851f42d4c957f2dULL);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      GradientSink sink;
      for (std::size_t b = start; b < end; ++b) {
        epoch_loss += accumulate_gradient(params, feats[order[b]], examples[order[b]], scale, sink);
      }
      adam_start.begin_step();
      adam_end.begin_step();
      adam_null.begin_step();
      for (const auto& [f, g] : sink.start) {
        const float gf = static_cast<float>(g);
        adam_start.update(f, std::span(params.start_weights().data() + f, 1), std::span(&gf, 1));
      }
      for (const auto& [f, g] : sink.end) {
        const float gf = static_cast<float>(g);
        adam_end.update(f, std::span(params.end_weights().data() + f, 1), std::span(&gf, 1));
      }
      const float gn = static_cast<float>(sink.null);
      adam_null.update(0, std::span(&params.null_weight(), 1), std::span(&gn, 1));
    }
    const auto e = record(epoch, epoch_loss / static_cast<double>(order.size()));
    if (dev.empty() || e.dev_overall > rep.best_dev_overall) {
      rep.best_epoch = epoch;
      rep.best_dev_overall = e.dev_overall;
      best = params;
    }
  }
  return best;
}

}  // namespace slotfill
