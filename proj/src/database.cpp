#include "mssplace/retrieval/database.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mssplace/core/serial.hpp"

namespace mss {

DescriptorDatabase DescriptorDatabase::build(Mat descriptors, Mat positions,
                                             std::vector<std::string> ids,
                                             std::vector<DescriptorSegment> layout) {
  const Index m = descriptors.rows();
  if (positions.rows() != m || static_cast<Index>(ids.size()) != m)
    throw ShapeError("database: descriptor/position/id row counts disagree");
  if (m > 0 && positions.cols() != 2) throw ShapeError("database: positions must be M x 2");
  if (!descriptors.allFinite() || !positions.allFinite())
    throw NumericError("database: non-finite entries");
  std::set<std::string> seen;
  for (const auto& id : ids)
    if (!seen.insert(id).second) throw DataError("database: duplicate id: " + id);
  DescriptorDatabase db;
  db.descriptors_ = std::move(descriptors);
  db.positions_ = std::move(positions);
  db.ids_ = std::move(ids);
  db.layout_ = std::move(layout);
  return db;
}

void DescriptorDatabase::save(const std::string& path) const {
  auto os = serial::open_out(path);
  serial::write_bytes(os, "PDB1", 4);
  serial::write_u64(os, static_cast<std::uint64_t>(size()));
  serial::write_u64(os, static_cast<std::uint64_t>(dim()));
  for (Index r = 0; r < descriptors_.rows(); ++r)
    for (Index c = 0; c < descriptors_.cols(); ++c) serial::write_f64(os, descriptors_(r, c));
  for (Index r = 0; r < positions_.rows(); ++r) {
    serial::write_f64(os, positions_(r, 0));
    serial::write_f64(os, positions_(r, 1));
  }
  for (const auto& id : ids_) serial::write_string(os, id);
  if (!os) throw DataError("write failed: " + path);
}

DescriptorDatabase DescriptorDatabase::load(const std::string& path) {
  auto is = serial::open_in(path);
  serial::expect_magic(is, "PDB1", "PDB1 database");
  const auto m = static_cast<Index>(serial::read_u64(is, "row count"));
  const auto d = static_cast<Index>(serial::read_u64(is, "descriptor dim"));
  Mat desc(m, d), pos(m, 2);
  for (Index r = 0; r < m; ++r)
    for (Index c = 0; c < d; ++c) desc(r, c) = serial::read_f64(is, "descriptor");
  for (Index r = 0; r < m; ++r) {
    pos(r, 0) = serial::read_f64(is, "position");
    pos(r, 1) = serial::read_f64(is, "position");
  }
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(m));
  for (Index r = 0; r < m; ++r) ids.push_back(serial::read_string(is, "id"));
  return build(std::move(desc), std::move(pos), std::move(ids));
}

namespace {

// Row order sorted by (squared distance, id); squared distances preserve both
// the ordering and the tie structure of Euclidean ones.
std::vector<int> ranked_rows(const DescriptorDatabase& db, const Vec& query) {
  const Index m = db.size();
  Vec d2 = (db.descriptors().rowwise() - query.transpose()).rowwise().squaredNorm();
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (d2(a) != d2(b)) return d2(a) < d2(b);
    return db.ids()[static_cast<std::size_t>(a)] < db.ids()[static_cast<std::size_t>(b)];
  });
  return order;
}

}  // namespace

std::vector<KnnHit> query_knn(const DescriptorDatabase& db, const Vec& query, int k) {
  if (db.size() == 0) throw DataError("knn: empty database");
  if (query.size() != db.dim()) throw ShapeError("knn: query dimension mismatch");
  if (k < 1) throw ConfigError("knn: k must be at least 1");
  if (k > db.size()) throw ConfigError("knn: k exceeds database size");
  const auto order = ranked_rows(db, query);
  std::vector<KnnHit> hits;
  hits.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const int row = order[static_cast<std::size_t>(i)];
    hits.push_back({db.ids()[static_cast<std::size_t>(row)], row,
                    (db.descriptors().row(row).transpose() - query).norm()});
  }
  return hits;
}

EvalResult evaluate(const DescriptorDatabase& db, const Mat& query_descriptors,
                    const Mat& query_positions, const EvalProtocol& protocol) {
  if (db.size() == 0) throw DataError("evaluate: empty database");
  if (query_descriptors.rows() == 0) throw DataError("evaluate: no queries");
  if (query_descriptors.cols() != db.dim()) throw ShapeError("evaluate: descriptor dim mismatch");
  if (query_positions.rows() != query_descriptors.rows() || query_positions.cols() != 2)
    throw ShapeError("evaluate: query positions must be Q x 2");
  if (!(protocol.distance_threshold > 0.0))
    throw ConfigError("evaluate: distance threshold must be positive");

  const Index m = db.size();
  const Index q = query_descriptors.rows();
  const int n_curve = 25;
  const int n_1pct = std::max(
      1, static_cast<int>(std::floor(0.01 * protocol.top_percent * static_cast<double>(m) + 0.5)));
  const int depth = std::min<int>(static_cast<int>(m), std::max(n_curve, n_1pct));

  std::vector<long> hits_at(static_cast<std::size_t>(depth) + 1, 0);
  for (Index i = 0; i < q; ++i) {
    const auto order = ranked_rows(db, query_descriptors.row(i).transpose());
    int first_hit = -1;
    for (int rank = 0; rank < depth; ++rank) {
      const int row = order[static_cast<std::size_t>(rank)];
      const double geo =
          (db.positions().row(row) - query_positions.row(i)).norm();
      if (geo <= protocol.distance_threshold) {
        first_hit = rank + 1;
        break;
      }
    }
    if (first_hit > 0)
      for (int n = first_hit; n <= depth; ++n) ++hits_at[static_cast<std::size_t>(n)];
  }

  EvalResult res;
  res.n_for_1pct = n_1pct;
  res.recall_at_n.resize(n_curve);
  const double scale = 100.0 / static_cast<double>(q);
  for (int n = 1; n <= n_curve; ++n)
    res.recall_at_n[static_cast<std::size_t>(n - 1)] =
        hits_at[static_cast<std::size_t>(std::min(n, depth))] * scale;
  res.ar_at_1 = res.recall_at_n[0];
  res.ar_at_1pct = hits_at[static_cast<std::size_t>(std::min(n_1pct, depth))] * scale;
  return res;
}

}  // namespace mss
