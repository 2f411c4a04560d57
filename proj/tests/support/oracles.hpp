#pragma once

// Reference implementations written directly from the stated formulas. They
// favour clarity over speed and share no code with the library beyond the
// data types and the feature extractors under test elsewhere.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "slotfill/corpus.hpp"
#include "slotfill/dense_index.hpp"
#include "slotfill/encoder.hpp"
#include "slotfill/reader.hpp"
#include "slotfill/scored_passage.hpp"

namespace slotfill::oracle {

std::uint64_t fnv1a(std::string_view bytes);

/// Lowercase ASCII, split on anything that is not [a-z0-9] or a byte >= 0x80.
std::vector<std::string> words(std::string_view text);

/// Scores every passage with Lucene BM25 and sorts (score desc, id asc),
/// dropping zero scores.
struct BruteForceBm25 {
  BruteForceBm25(const std::vector<Passage>& passages, double k1 = 0.9, double b = 0.4);
  double score(const std::vector<std::string>& query_terms, std::size_t passage) const;
  ResultList search(std::string_view query, std::size_t k) const;

  std::vector<std::string> ids;
  std::vector<std::vector<std::string>> docs;
  std::map<std::string, double> df;
  double k1;
  double b;
  double avg_len = 0.0;
};

/// Float dot products accumulated left to right; ties by id.
ResultList brute_force_dense(const std::vector<std::string>& ids, const std::vector<DenseVector>& rows,
                             const DenseVector& query, std::size_t k);

struct GradientComparison {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
};

/// Central differences of the pair loss, evaluated in double from the
/// float parameters, against loss_gradient().
GradientComparison check_encoder_gradient(const EncoderParams& params, const TrainingInstance& instance,
                                          double epsilon, std::size_t samples, std::uint64_t seed);

/// Central differences of the reader log-likelihood (null logit in both
/// softmaxes) against reader_loss_gradient().
GradientComparison check_reader_gradient(const ReaderParams& params, const ReaderExample& example,
                                         double epsilon, std::size_t samples, std::uint64_t seed);

}  // namespace slotfill::oracle
