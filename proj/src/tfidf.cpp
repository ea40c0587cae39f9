#include "mssplace/encoders/tfidf.hpp"

#include <cctype>
#include <cmath>

#include "mssplace/core/serial.hpp"

namespace mss {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char ch : text) {
    if (std::isalnum(ch)) {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

TfidfModel fit_tfidf(const std::vector<std::string>& corpus) {
  if (corpus.empty()) throw DataError("tfidf: cannot fit on an empty corpus");
  std::map<std::string, long> doc_freq;
  for (const auto& doc : corpus) {
    std::map<std::string, int> seen;
    for (const auto& tok : tokenize(doc)) seen[tok] = 1;
    for (const auto& [tok, _] : seen) ++doc_freq[tok];
  }
  TfidfModel model;
  model.document_count = static_cast<long>(corpus.size());
  model.tokens.reserve(doc_freq.size());
  model.idf.resize(static_cast<Index>(doc_freq.size()));
  Index i = 0;
  const double n = static_cast<double>(corpus.size());
  for (const auto& [tok, df] : doc_freq) {
    model.vocabulary[tok] = static_cast<int>(i);
    model.tokens.push_back(tok);
    model.idf(i) = std::log((1.0 + n) / (1.0 + static_cast<double>(df))) + 1.0;
    ++i;
  }
  return model;
}

Vec transform_tfidf(const TfidfModel& model, const std::string& doc) {
  if (!model.fitted()) throw ConfigError("tfidf: transform on an unfitted model");
  Vec v = Vec::Zero(model.dim());
  const auto toks = tokenize(doc);
  if (toks.empty()) return v;
  const double inv_len = 1.0 / static_cast<double>(toks.size());
  for (const auto& tok : toks) {
    auto it = model.vocabulary.find(tok);
    if (it == model.vocabulary.end()) continue;  // unseen tokens ignored
    v(it->second) += inv_len;
  }
  v.array() *= model.idf.array();
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
  return v;
}

void TfidfModel::save(const std::string& path) const {
  auto os = serial::open_out(path);
  serial::write_bytes(os, "TFM1", 4);
  serial::write_u64(os, static_cast<std::uint64_t>(document_count));
  serial::write_u64(os, static_cast<std::uint64_t>(tokens.size()));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    serial::write_string(os, tokens[i]);
    serial::write_f64(os, idf(static_cast<Index>(i)));
  }
  if (!os) throw DataError("write failed: " + path);
}

TfidfModel TfidfModel::load(const std::string& path) {
  auto is = serial::open_in(path);
  serial::expect_magic(is, "TFM1", "TFM1 tf-idf model");
  TfidfModel model;
  model.document_count = static_cast<long>(serial::read_u64(is, "document count"));
  const std::uint64_t n = serial::read_u64(is, "vocabulary size");
  model.tokens.reserve(n);
  model.idf.resize(static_cast<Index>(n));
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string tok = serial::read_string(is, "token");
    model.idf(static_cast<Index>(i)) = serial::read_f64(is, "idf");
    model.vocabulary[tok] = static_cast<int>(i);
    model.tokens.push_back(std::move(tok));
  }
  return model;
}

}  // namespace mss
