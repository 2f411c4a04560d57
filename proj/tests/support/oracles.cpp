#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "slotfill/random.hpp"

namespace slotfill::oracle {

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if ((u >= 'a' && u <= 'z') || (u >= '0' && u <= '9') || u >= 0x80) {
      cur.push_back(c);
    } else if (u >= 'A' && u <= 'Z') {
      cur.push_back(static_cast<char>(u - 'A' + 'a'));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

BruteForceBm25::BruteForceBm25(const std::vector<Passage>& passages, double k1_, double b_) : k1(k1_), b(b_) {
  double total = 0.0;
  for (const auto& p : passages) {
    ids.push_back(p.passage_id);
    docs.push_back(words(p.text));
    total += static_cast<double>(docs.back().size());
    for (const auto& t : std::set<std::string>(docs.back().begin(), docs.back().end())) df[t] += 1.0;
  }
  avg_len = total / static_cast<double>(docs.size());
}

double BruteForceBm25::score(const std::vector<std::string>& query_terms, std::size_t passage) const {
  const double n = static_cast<double>(docs.size());
  std::set<std::string> seen;
  double total = 0.0;
  for (const auto& t : query_terms) {
    if (!seen.insert(t).second) continue;
    const double tf = static_cast<double>(std::count(docs[passage].begin(), docs[passage].end(), t));
    if (tf == 0.0) continue;
    const double d = df.at(t);
    const double idf = std::log(1.0 + (n - d + 0.5) / (d + 0.5));
    const double len = static_cast<double>(docs[passage].size());
    total += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avg_len));
  }
  return total;
}

ResultList BruteForceBm25::search(std::string_view query, std::size_t k) const {
  const auto terms = words(query);
  ResultList all;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const double s = score(terms, i);
    if (s > 0.0) all.push_back({ids[i], s, 0});
  }
  std::sort(all.begin(), all.end(), [](const ScoredPassage& a, const ScoredPassage& c) {
    return a.score != c.score ? a.score > c.score : a.passage_id < c.passage_id;
  });
  if (all.size() > k) all.resize(k);
  for (std::size_t i = 0; i < all.size(); ++i) all[i].rank = i + 1;
  return all;
}

ResultList brute_force_dense(const std::vector<std::string>& ids, const std::vector<DenseVector>& rows,
                             const DenseVector& query, std::size_t k) {
  ResultList all;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    float s = 0.0f;
    for (std::size_t d = 0; d < query.size(); ++d) s += query[d] * rows[i][d];
    all.push_back({ids[i], static_cast<double>(s), 0});
  }
  std::sort(all.begin(), all.end(), [](const ScoredPassage& a, const ScoredPassage& c) {
    return a.score != c.score ? a.score > c.score : a.passage_id < c.passage_id;
  });
  if (all.size() > k) all.resize(k);
  for (std::size_t i = 0; i < all.size(); ++i) all[i].rank = i + 1;
  return all;
}

namespace {

double relative_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

// Dense copy (double) of the columns an instance touches.
struct EncoderModel {
  std::uint32_t d_out = 0;
  std::map<std::uint32_t, std::vector<double>> wq;
  std::map<std::uint32_t, std::vector<double>> wp;
  SparseFeatures q, pos, neg;

  std::vector<double> encode(const std::map<std::uint32_t, std::vector<double>>& w, const SparseFeatures& x) const {
    std::vector<double> out(d_out, 0.0);
    for (std::size_t j = 0; j < x.size(); ++j) {
      const auto& col = w.at(x.indices[j]);
      for (std::uint32_t i = 0; i < d_out; ++i) out[i] += x.weights[j] * col[i];
    }
    return out;
  }

  double loss() const {
    const auto eq = encode(wq, q);
    const auto ep = encode(wp, pos);
    const auto en = encode(wp, neg);
    double sp = 0.0;
    double sn = 0.0;
    for (std::uint32_t i = 0; i < d_out; ++i) {
      sp += eq[i] * ep[i];
      sn += eq[i] * en[i];
    }
    const double z = sn - sp;
    return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  }
};

}  // namespace

GradientComparison check_encoder_gradient(const EncoderParams& params, const TrainingInstance& instance,
                                          double epsilon, std::size_t samples, std::uint64_t seed) {
  EncoderModel m;
  m.d_out = params.d_out();
  m.q = featurize(instance.query.rendered, params.d_in());
  m.pos = featurize(instance.positive.text, params.d_in());
  m.neg = featurize(instance.negative.text, params.d_in());
  auto load = [&](Tower tower, const SparseFeatures& x, std::map<std::uint32_t, std::vector<double>>& w) {
    for (auto f : x.indices) {
      const auto col = params.column(tower, f);
      w[f] = std::vector<double>(col.begin(), col.end());
    }
  };
  load(Tower::kQuery, m.q, m.wq);
  load(Tower::kPassage, m.pos, m.wp);
  load(Tower::kPassage, m.neg, m.wp);

  const EncoderGradient g = loss_gradient(params, instance);

  // Candidate coordinates: every touched (tower, feature, row), plus a few
  // untouched features whose derivative must be zero.
  struct Coord {
    bool query;
    std::uint32_t feature;
    std::uint32_t row;
  };
  std::vector<Coord> coords;
  for (const auto& [f, col] : m.wq)
    for (std::uint32_t i = 0; i < m.d_out; ++i) coords.push_back({true, f, i});
  for (const auto& [f, col] : m.wp)
    for (std::uint32_t i = 0; i < m.d_out; ++i) coords.push_back({false, f, i});
  Rng rng(seed);
  rng.shuffle(std::span(coords));
  if (coords.size() > samples) coords.resize(samples);

  GradientComparison out;
  for (const auto& c : coords) {
    auto& w = c.query ? m.wq : m.wp;
    double& x = w[c.feature][c.row];
    const double saved = x;
    x = saved + epsilon;
    const double up = m.loss();
    x = saved - epsilon;
    const double down = m.loss();
    x = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double analytic = (c.query ? g.query : g.passage).at(c.feature, c.row, m.d_out);
    out.max_relative_error = std::max(out.max_relative_error, relative_error(analytic, numeric));
    ++out.coordinates;
  }
  // Untouched features: the loss does not depend on them at all.
  for (std::size_t i = 0; out.coordinates < samples + 8 && i < 8; ++i) {
    const auto f = static_cast<std::uint32_t>(rng.below(params.d_in()));
    if (m.wq.contains(f) || m.wp.contains(f)) continue;
    const auto row = static_cast<std::uint32_t>(rng.below(m.d_out));
    out.max_relative_error = std::max(out.max_relative_error, relative_error(g.query.at(f, row, m.d_out), 0.0));
    out.max_relative_error = std::max(out.max_relative_error, relative_error(g.passage.at(f, row, m.d_out), 0.0));
    out.coordinates += 2;
  }
  return out;
}

namespace {

struct ReaderModel {
  std::map<std::uint32_t, double> ws;
  std::map<std::uint32_t, double> we;
  double null = 0.0;
  std::vector<std::vector<std::uint32_t>> feats;
  std::size_t gold_start = 0;  // index into [null, tokens...]
  std::size_t gold_end = 0;

  static double nll(const std::vector<double>& z, std::size_t gold) {
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    return -(z[gold] - (m + std::log(s)));
  }

  double loss() const {
    std::vector<double> zs = {null};
    std::vector<double> ze = {null};
    for (const auto& f : feats) {
      double a = 0.0;
      double b = 0.0;
      for (auto idx : f) {
        a += ws.at(idx);
        b += we.at(idx);
      }
      zs.push_back(a);
      ze.push_back(b);
    }
    return nll(zs, gold_start) + nll(ze, gold_end);
  }
};

double lookup(const std::vector<std::pair<std::uint32_t, double>>& g, std::uint32_t f) {
  for (const auto& [idx, v] : g) {
    if (idx == f) return v;
  }
  return 0.0;
}

}  // namespace

GradientComparison check_reader_gradient(const ReaderParams& params, const ReaderExample& example,
                                         double epsilon, std::size_t samples, std::uint64_t seed) {
  ReaderModel m;
  m.feats = token_features(example.query, example.passage, params.d_feat());
  for (const auto& f : m.feats) {
    for (auto idx : f) {
      m.ws[idx] = params.start_weights()[idx];
      m.we[idx] = params.end_weights()[idx];
    }
  }
  m.null = params.null_weight();
  if (example.span) {
    m.gold_start = example.span->first + 1;
    m.gold_end = example.span->second + 1;
  }
  const ReaderGradient g = reader_loss_gradient(params, example);

  struct Coord {
    int which;  // 0 start, 1 end, 2 null
    std::uint32_t feature;
  };
  std::vector<Coord> coords = {{2, 0}};
  for (const auto& [f, v] : m.ws) coords.push_back({0, f});
  for (const auto& [f, v] : m.we) coords.push_back({1, f});
  Rng rng(seed);
  rng.shuffle(std::span(coords).subspan(1));
  if (coords.size() > samples) coords.resize(samples);

  GradientComparison out;
  for (const auto& c : coords) {
    double& x = c.which == 0 ? m.ws[c.feature] : (c.which == 1 ? m.we[c.feature] : m.null);
    const double saved = x;
    x = saved + epsilon;
    const double up = m.loss();
    x = saved - epsilon;
    const double down = m.loss();
    x = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double analytic = c.which == 0 ? lookup(g.start, c.feature)
                                         : (c.which == 1 ? lookup(g.end, c.feature) : g.null);
    out.max_relative_error = std::max(out.max_relative_error, relative_error(analytic, numeric));
    ++out.coordinates;
  }
  return out;
}

}  // namespace slotfill::oracle
