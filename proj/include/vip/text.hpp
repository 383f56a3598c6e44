#pragma once

#include "vip/types.hpp"

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace vip::text {

// Lowercase, split on whitespace, hash each token into [0, vocab).
std::vector<int> tokenize(std::string_view text, int vocab = 4096);

// text -> fixed-size vector. Used for the text loss and for description
// similarity; real deployments would put a sentence encoder behind this.
class SentenceEmbeddingProvider {
 public:
  virtual ~SentenceEmbeddingProvider() = default;
  virtual std::string name() const = 0;
  virtual Eigen::VectorXd embed(std::string_view text) const = 0;
};

// Bag of hashed word unigrams (alphanumeric runs, lowercased), L2-normalized.
class HashingEmbedder final : public SentenceEmbeddingProvider {
 public:
  explicit HashingEmbedder(int dim = 256) : dim_(dim) {}
  std::string name() const override { return "hashing"; }
  Eigen::VectorXd embed(std::string_view text) const override;

 private:
  int dim_;
};

std::unique_ptr<SentenceEmbeddingProvider> make_embedder(const std::string& name);

// Cosine similarity; 0 when either vector is zero.
double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace vip::text
