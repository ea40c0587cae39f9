#include "mssplace/encoders/embedding_file.hpp"

#include "mssplace/core/serial.hpp"

namespace mss {

Vec ExternalEmbeddings::get(const std::string& id) const {
  auto it = index.find(id);
  if (it == index.end()) throw DataError("no external embedding for id: " + id);
  return vectors.row(it->second).transpose();
}

ExternalEmbeddings load_external_embeddings(const std::string& path) {
  auto is = serial::open_in(path);
  serial::expect_magic(is, "EMB1", "EMB1 embedding");
  ExternalEmbeddings emb;
  const std::uint64_t count = serial::read_u64(is, "record count");
  emb.dim = static_cast<Index>(serial::read_u64(is, "embedding dim"));
  if (emb.dim <= 0) throw DataError("embedding file declares a non-positive dimension");
  emb.ids.reserve(count);
  emb.vectors.resize(static_cast<Index>(count), emb.dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string id = serial::read_string(is, "embedding id");
    if (emb.index.count(id)) throw DataError("duplicate embedding id: " + id);
    for (Index j = 0; j < emb.dim; ++j)
      emb.vectors(static_cast<Index>(i), j) = serial::read_f64(is, "embedding value");
    emb.index[id] = static_cast<int>(i);
    emb.ids.push_back(std::move(id));
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw DataError("trailing bytes after the declared records in " + path);
  return emb;
}

void save_external_embeddings(const std::string& path, const ExternalEmbeddings& emb) {
  if (emb.vectors.rows() != static_cast<Index>(emb.ids.size()))
    throw ShapeError("embedding save: id/vector count mismatch");
  if (emb.vectors.cols() != emb.dim) throw ShapeError("embedding save: dimension mismatch");
  auto os = serial::open_out(path);
  serial::write_bytes(os, "EMB1", 4);
  serial::write_u64(os, emb.ids.size());
  serial::write_u64(os, static_cast<std::uint64_t>(emb.dim));
  for (std::size_t i = 0; i < emb.ids.size(); ++i) {
    serial::write_string(os, emb.ids[i]);
    for (Index j = 0; j < emb.dim; ++j)
      serial::write_f64(os, emb.vectors(static_cast<Index>(i), j));
  }
  if (!os) throw DataError("write failed: " + path);
}

}  // namespace mss
