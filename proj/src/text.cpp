#include "vip/text.hpp"

#include <cctype>
#include <sstream>

namespace vip::text {

std::vector<int> tokenize(std::string_view text, int vocab) {
  std::vector<int> ids;
  std::string tok;
  auto flush = [&] {
    if (!tok.empty()) ids.push_back(static_cast<int>(fnv1a64(tok) % static_cast<std::uint64_t>(vocab)));
    tok.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      tok.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  return ids;
}

Eigen::VectorXd HashingEmbedder::embed(std::string_view text) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
  std::string word;
  auto flush = [&] {
    if (!word.empty()) v(static_cast<Eigen::Index>(fnv1a64(word) % static_cast<std::uint64_t>(dim_))) += 1.0;
    word.clear();
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else {
      flush();
    }
  }
  flush();
  const double n = v.norm();
  if (n > 0) v /= n;
  return v;
}

std::unique_ptr<SentenceEmbeddingProvider> make_embedder(const std::string& name) {
  if (name == "hashing") return std::make_unique<HashingEmbedder>();
  throw ConfigError("unknown sentence embedding provider '" + name + "'");
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0 || nb == 0) return 0.0;
  return a.dot(b) / (na * nb);
}

}  // namespace vip::text
