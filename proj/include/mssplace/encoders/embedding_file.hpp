#pragma once

#include <map>
#include <string>
#include <vector>

#include "mssplace/core/types.hpp"

namespace mss {

// EMB1 container: externally computed embeddings keyed by sample id (e.g.
// CLIP text vectors). Order is preserved so save(load(f)) == f.
struct ExternalEmbeddings {
  Index dim = 0;
  std::vector<std::string> ids;
  Mat vectors;  // n x dim, row i belongs to ids[i]
  std::map<std::string, int> index;

  bool contains(const std::string& id) const { return index.count(id) > 0; }
  Vec get(const std::string& id) const;
};

ExternalEmbeddings load_external_embeddings(const std::string& path);

void save_external_embeddings(const std::string& path, const ExternalEmbeddings& emb);

}  // namespace mss
