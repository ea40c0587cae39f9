#pragma once

#include <map>
#include <string>
#include <vector>

#include "mssplace/core/types.hpp"

namespace mss {

// Bag-of-words model with smoothed inverse document frequencies:
// idf = ln((1+N)/(1+df)) + 1. No vocabulary size cap.
struct TfidfModel {
  std::vector<std::string> tokens;       // index -> token, lexicographic
  std::map<std::string, int> vocabulary; // token -> index
  Vec idf;
  long document_count = 0;

  bool fitted() const { return document_count > 0; }
  Index dim() const { return idf.size(); }

  void save(const std::string& path) const;
  static TfidfModel load(const std::string& path);
};

// Lowercases and splits on runs of non-alphanumeric characters.
std::vector<std::string> tokenize(const std::string& text);

TfidfModel fit_tfidf(const std::vector<std::string>& corpus);

// tf = term count / doc length; result is L2-normalized. Unknown tokens are
// ignored; an empty document maps to the zero vector.
Vec transform_tfidf(const TfidfModel& model, const std::string& doc);

}  // namespace mss
