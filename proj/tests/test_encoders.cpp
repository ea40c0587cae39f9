#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mssplace/encoders/bev.hpp"
#include "mssplace/encoders/cnn.hpp"
#include "mssplace/encoders/embedding_file.hpp"
#include "mssplace/encoders/pca.hpp"
#include "mssplace/encoders/text_encoder.hpp"
#include "mssplace/encoders/tfidf.hpp"
#include "support/jacobi.hpp"
#include "support/testutil.hpp"

using namespace mss;
using testutil::random_mat;

namespace {

ImageInput random_image(Rng& rng, int channels, int size) {
  ImageInput img;
  img.height = img.width = size;
  img.channels = channels;
  img.values = random_mat(rng, channels, size * size, 0.0, 1.0);
  return img;
}

CnnEncoderConfig tiny_cnn(int in_channels) {
  CnnEncoderConfig cfg;
  cfg.in_channels = in_channels;
  cfg.stage_widths = {4, 8};
  cfg.output_dim = 16;
  return cfg;
}

}  // namespace

TEST_CASE("cnn encoder: deterministic under fixed params and input") {
  Rng init(3);
  ParameterStore store;
  CnnEncoder enc(store, "image.", tiny_cnn(3), 0, init);
  Rng rng(5);
  ImageInput img = random_image(rng, 3, 16);
  Tape t1, t2;
  Mat a = enc.encode(t1, img).value();
  Mat b = enc.encode(t2, img).value();
  CHECK((a.array() == b.array()).all());
  CHECK(a.rows() == 16);
  CHECK(a.cols() == 1);
}

TEST_CASE("cnn encoder: all-zero image with all-zero params gives a zero embedding") {
  Rng init(3);
  ParameterStore store;
  CnnEncoder enc(store, "image.", tiny_cnn(3), 0, init);
  for (int i = 0; i < store.size(); ++i)
    if (store.at(i).name != "image.gem.p") store.at(i).value.setZero();
  ImageInput img;
  img.height = img.width = 12;
  img.channels = 3;
  img.values = Mat::Zero(3, 144);
  Tape tape;
  CHECK(enc.encode(tape, img).value().isZero(0.0));
}

TEST_CASE("cnn encoder: gem pooling of an all-zero feature map returns eps per channel") {
  Tape tape;
  Var f = input(tape, Mat::Zero(4, 9));
  Var p = input(tape, Mat::Constant(1, 1, 3.0));
  Mat pooled = gem_pool(f, p, 1e-6).value();
  CHECK((pooled.array() - 1e-6).abs().maxCoeff() < 1e-18);
}

TEST_CASE("cnn encoder: channel mismatch is an error") {
  Rng init(3);
  ParameterStore store;
  CnnEncoder enc(store, "mask.", tiny_cnn(1), 0, init);
  Rng rng(5);
  ImageInput rgb = random_image(rng, 3, 12);
  Tape tape;
  CHECK_THROWS_AS(enc.encode(tape, rgb), ShapeError);
}

TEST_CASE("cnn encoder: image and mask encoders differ only in the first convolution") {
  Rng init1(3), init2(3);
  ParameterStore s_img, s_mask;
  CnnEncoder img_enc(s_img, "enc.", tiny_cnn(3), 0, init1);
  CnnEncoder mask_enc(s_mask, "enc.", tiny_cnn(1), 0, init2);
  auto sig_img = s_img.shape_signature("enc.");
  auto sig_mask = s_mask.shape_signature("enc.");
  REQUIRE(sig_img.size() == sig_mask.size());
  int diffs = 0;
  for (std::size_t i = 0; i < sig_img.size(); ++i)
    if (sig_img[i] != sig_mask[i]) {
      ++diffs;
      CHECK(sig_img[i].find("stage1.down.weight") != std::string::npos);
    }
  CHECK(diffs == 1);
}

TEST_CASE("cnn encoder: pixel gradient matches finite differences") {
  Rng init(7);
  ParameterStore store;
  CnnEncoder enc(store, "image.", tiny_cnn(3), 0, init);
  Rng rng(11);
  Mat pixels = random_mat(rng, 3, 100, 0.05, 0.95);
  auto build = [&](Tape& t, const std::vector<Var>& xs) {
    return sum_all(enc.encode(t, xs[0], 10, 10));
  };
  CHECK(testutil::max_rel_fd_error(build, {pixels}, 1e-6) < 1e-4);
}

TEST_CASE("cnn encoder: distinct uniform masks give distinct embeddings") {
  Rng init(13);
  ParameterStore store;
  CnnEncoder enc(store, "mask.", tiny_cnn(1), 0, init);
  ImageInput a, b;
  a.height = a.width = b.height = b.width = 12;
  a.channels = b.channels = 1;
  a.values = Mat::Constant(1, 144, 2.0 / 12.0);
  b.values = Mat::Constant(1, 144, 7.0 / 12.0);
  Tape tape;
  Mat ea = enc.encode(tape, a).value(), eb = enc.encode(tape, b).value();
  CHECK((ea - eb).norm() > 1e-6);
}

TEST_CASE("voxelize_bev: single point lands in exactly one cell") {
  PointCloud cloud;
  cloud.xyz.resize(1, 3);
  cloud.xyz << 0.1, 0.1, 5.0;
  BevConfig cfg;
  cfg.resolution = 8;
  Mat grid = voxelize_bev(cloud, cfg);
  CHECK((grid.array() != 0.0).count() == 1);
  CHECK(grid.maxCoeff() == doctest::Approx(1.0 / cfg.saturation_count));
}

TEST_CASE("voxelize_bev: all points outside the bounds is an error") {
  PointCloud cloud;
  cloud.xyz.resize(2, 3);
  cloud.xyz << 100.0, 0.0, 0.0, 0.0, -300.0, 1.0;
  CHECK_THROWS_AS(voxelize_bev(cloud, BevConfig{}), DataError);
}

TEST_CASE("voxelize_bev: empty cloud is an error") {
  CHECK_THROWS_AS(voxelize_bev(PointCloud{}, BevConfig{}), DataError);
}

TEST_CASE("voxelize_bev: matches a brute-force binning oracle") {
  Rng rng(17);
  PointCloud cloud;
  cloud.xyz = random_mat(rng, 100, 3, -25.0, 25.0);
  BevConfig cfg;
  cfg.resolution = 16;
  Mat grid = voxelize_bev(cloud, cfg);

  // Independent binning with explicit loops.
  std::vector<int> counts(16 * 16, 0);
  for (Index i = 0; i < 100; ++i) {
    const double x = cloud.xyz(i, 0), y = cloud.xyz(i, 1);
    if (x < cfg.x_min || x >= cfg.x_max || y < cfg.y_min || y >= cfg.y_max) continue;
    const int cx = static_cast<int>((x - cfg.x_min) / (cfg.x_max - cfg.x_min) * 16);
    const int cy = static_cast<int>((y - cfg.y_min) / (cfg.y_max - cfg.y_min) * 16);
    counts[static_cast<std::size_t>(cy * 16 + cx)]++;
  }
  for (int i = 0; i < 256; ++i)
    CHECK(grid(0, i) ==
          doctest::Approx(std::min(1.0, counts[static_cast<std::size_t>(i)] / 5.0)));
}

TEST_CASE("point cloud encoding: z-translation and point order do not matter") {
  Rng rng(19);
  PointCloud cloud;
  cloud.xyz = random_mat(rng, 60, 3, -15.0, 15.0);
  BevConfig cfg;
  cfg.resolution = 16;

  PointCloud shifted = cloud;
  shifted.xyz.col(2).array() += 3.7;
  CHECK((voxelize_bev(cloud, cfg) - voxelize_bev(shifted, cfg)).norm() == 0.0);

  PointCloud permuted;
  permuted.xyz = cloud.xyz.colwise().reverse();
  CHECK((voxelize_bev(cloud, cfg) - voxelize_bev(permuted, cfg)).norm() == 0.0);

  Rng init(23);
  ParameterStore store;
  CnnEncoder enc(store, "cloud.", tiny_cnn(1), 0, init);
  Tape tape;
  Mat e1 = enc.encode(tape, bev_image(cloud, cfg)).value();
  Mat e2 = enc.encode(tape, bev_image(shifted, cfg)).value();
  Mat e3 = enc.encode(tape, bev_image(permuted, cfg)).value();
  CHECK((e1.array() == e2.array()).all());
  CHECK((e1.array() == e3.array()).all());
}

TEST_CASE("tfidf: smoothed idf matches the hand-evaluated formula") {
  TfidfModel m = fit_tfidf({"a b", "a c"});
  REQUIRE(m.dim() == 3);
  // token "a": df = 2, idf = ln(3/3) + 1 = 1
  CHECK(m.idf(m.vocabulary.at("a")) == doctest::Approx(1.0));
  // tokens "b","c": df = 1, idf = ln(3/2) + 1
  CHECK(m.idf(m.vocabulary.at("b")) == doctest::Approx(std::log(1.5) + 1.0));
  CHECK(m.document_count == 2);
}

TEST_CASE("tfidf: transform values match a hand computation") {
  TfidfModel m = fit_tfidf({"a b", "a c"});
  Vec v = transform_tfidf(m, "a a b");
  // tf(a) = 2/3, tf(b) = 1/3; weights (2/3*1, 1/3*(ln1.5+1)); then L2.
  Vec raw = Vec::Zero(3);
  raw(m.vocabulary.at("a")) = 2.0 / 3.0;
  raw(m.vocabulary.at("b")) = (1.0 / 3.0) * (std::log(1.5) + 1.0);
  raw /= raw.norm();
  CHECK((v - raw).norm() < 1e-15);
}

TEST_CASE("tfidf: unseen-only documents map to the zero vector") {
  TfidfModel m = fit_tfidf({"a b", "a c"});
  CHECK(transform_tfidf(m, "x y z").isZero());
  CHECK(transform_tfidf(m, "").isZero());
}

TEST_CASE("tfidf: transform is bit-exactly reproducible") {
  TfidfModel m = fit_tfidf({"north tower", "old oak", "north gate"});
  Vec a = transform_tfidf(m, "north tower gate");
  Vec b = transform_tfidf(m, "north tower gate");
  CHECK((a.array() == b.array()).all());
}

TEST_CASE("tfidf: empty corpus is an error; tokenization lowercases") {
  CHECK_THROWS_AS(fit_tfidf({}), DataError);
  auto toks = tokenize("North-Gate 12, oak!");
  REQUIRE(toks.size() == 4);
  CHECK(toks[0] == "north");
  CHECK(toks[1] == "gate");
  CHECK(toks[2] == "12");
  CHECK(toks[3] == "oak");
}

TEST_CASE("pca: axis-aligned data recovers signed unit axes and exact variances") {
  const double a = std::sqrt(6.0), b = std::sqrt(1.5);
  Mat rows(4, 2);
  rows << a, 0, -a, 0, 0, b, 0, -b;  // sample covariance diag(4, 1)
  PcaModel m = fit_pca(rows, 2);
  CHECK(m.explained_variance(0) == doctest::Approx(4.0));
  CHECK(m.explained_variance(1) == doctest::Approx(1.0));
  CHECK((m.components.row(0) - Eigen::RowVector2d(1, 0)).norm() < 1e-12);
  CHECK((m.components.row(1) - Eigen::RowVector2d(0, 1)).norm() < 1e-12);
}

TEST_CASE("pca: projecting the mean gives zero") {
  Rng rng(29);
  Mat rows = random_mat(rng, 20, 6);
  PcaModel m = fit_pca(rows, 3);
  CHECK(project_pca(m, m.mean).norm() < 1e-12);
}

TEST_CASE("pca: matches the Jacobi eigendecomposition oracle up to sign") {
  Rng rng(31);
  Mat rows = random_mat(rng, 50, 10);
  PcaModel m = fit_pca(rows, 3);

  Mat centered = rows.rowwise() - rows.colwise().mean();
  Mat cov = centered.transpose() * centered / 49.0;
  auto oracle = testutil::jacobi_eigen(cov);
  for (int i = 0; i < 3; ++i) {
    CHECK(m.explained_variance(i) == doctest::Approx(oracle.values(i)).epsilon(1e-8));
    const double dot = std::abs(m.components.row(i).dot(oracle.vectors.col(i).transpose()));
    CHECK(dot == doctest::Approx(1.0).epsilon(1e-8));
  }
  // Projections agree up to per-component sign.
  Vec probe = random_mat(rng, 10, 1).col(0);
  Vec mine = project_pca(m, probe);
  Vec theirs = oracle.vectors.leftCols(3).transpose() * (probe - m.mean);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(mine(i)) == doctest::Approx(std::abs(theirs(i))).epsilon(1e-8));
}

TEST_CASE("pca: components are orthonormal and beat random projections") {
  Rng rng(37);
  Mat rows = random_mat(rng, 60, 8);
  PcaModel m = fit_pca(rows, 4);
  Mat gram = m.components * m.components.transpose();
  CHECK((gram - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);

  Mat centered = rows.rowwise() - m.mean.transpose();
  auto recon_err = [&](const Mat& basis) {
    Mat proj = centered * basis.transpose() * basis;
    return (centered - proj).squaredNorm();
  };
  const double pca_err = recon_err(m.components);
  for (int trial = 0; trial < 5; ++trial) {
    Mat q = random_mat(rng, 4, 8);
    Eigen::HouseholderQR<Mat> qr(q.transpose());
    Mat ortho = Mat(qr.householderQ()).leftCols(4).transpose();
    CHECK(pca_err <= recon_err(ortho) + 1e-9);
  }
}

TEST_CASE("pca: rank-deficient fits are flagged with zero variance padding") {
  Mat rows = Mat::Zero(10, 5);
  for (Index i = 0; i < 10; ++i) rows(i, 0) = static_cast<double>(i);
  PcaModel m = fit_pca(rows, 3);
  CHECK(m.rank_deficient);
  CHECK(m.explained_variance(1) == 0.0);
  CHECK(m.explained_variance(2) == 0.0);
  Mat gram = m.components * m.components.transpose();
  CHECK((gram - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("pca: too few samples or dimensions is an error") {
  Mat rows = Mat::Zero(3, 8);
  CHECK_THROWS_AS(fit_pca(rows, 4), ConfigError);
  Mat rows2 = Mat::Zero(10, 2);
  CHECK_THROWS_AS(fit_pca(rows2, 4), ConfigError);
}

TEST_CASE("pca/tfidf models round-trip through disk") {
  namespace fs = std::filesystem;
  Rng rng(41);
  Mat rows = random_mat(rng, 30, 6);
  PcaModel m = fit_pca(rows, 3);
  const std::string pp = (fs::temp_directory_path() / "mss_pca.pcm").string();
  m.save(pp);
  PcaModel m2 = PcaModel::load(pp);
  CHECK((m.components.array() == m2.components.array()).all());
  CHECK((m.mean.array() == m2.mean.array()).all());
  fs::remove(pp);

  TfidfModel t = fit_tfidf({"a b c", "b c d", "d e"});
  const std::string tp = (fs::temp_directory_path() / "mss_tfidf.tfm").string();
  t.save(tp);
  TfidfModel t2 = TfidfModel::load(tp);
  CHECK(t2.vocabulary == t.vocabulary);
  CHECK((t2.idf.array() == t.idf.array()).all());
  CHECK(t2.document_count == t.document_count);
  fs::remove(tp);
}

TEST_CASE("text encoder: identical documents give identical embeddings") {
  TfidfModel tf = fit_tfidf({"oak tower north", "gate oak", "tower gate south"});
  Mat rows(3, tf.dim());
  int r = 0;
  for (const auto& d : {"oak tower north", "gate oak", "tower gate south"})
    rows.row(r++) = transform_tfidf(tf, d).transpose();
  PcaModel pca = fit_pca(rows, 2);

  Rng init(43);
  ParameterStore store;
  TextEncoder enc(store, "text.", 2, 8, 0, init);
  Tape tape;
  Mat a = encode_text(tape, "oak tower", tf, pca, enc).value();
  Mat b = encode_text(tape, "oak tower", tf, pca, enc).value();
  CHECK((a.array() == b.array()).all());
}

TEST_CASE("text encoder: zero input with zero biases maps to zero") {
  Rng init(47);
  ParameterStore store;
  TextEncoder enc(store, "text.", 4, 6, 0, init);
  Tape tape;
  CHECK(enc.encode(tape, Vec(Vec::Zero(4))).value().isZero(0.0));
}

TEST_CASE("text encoder: unfitted models are an error") {
  Rng init(53);
  ParameterStore store;
  TextEncoder enc(store, "text.", 4, 6, 0, init);
  TfidfModel tf;
  PcaModel pca;
  Tape tape;
  CHECK_THROWS_AS(encode_text(tape, "anything", tf, pca, enc), ConfigError);
}

TEST_CASE("text encoder: parameter gradients match finite differences") {
  Rng init(59);
  ParameterStore store;
  TextEncoder enc(store, "text.", 3, 4, 0, init);
  Rng rng(61);
  const Vec feat = random_mat(rng, 3, 1).col(0);
  auto value = [&] {
    Tape t;
    return sum_all(enc.encode(t, feat)).value()(0, 0);
  };
  auto grad = [&] {
    Tape t;
    Var loss = sum_all(enc.encode(t, feat));
    t.backward(loss.id());
  };
  CHECK(testutil::max_rel_fd_error_params(value, grad, store) < 1e-4);
}

TEST_CASE("embedding file: round-trip is the identity, duplicates rejected") {
  namespace fs = std::filesystem;
  Rng rng(67);
  ExternalEmbeddings emb;
  emb.dim = 512;  // CLIP-B width
  emb.ids = {"s0", "s1", "s2"};
  emb.vectors = random_mat(rng, 3, 512);
  for (int i = 0; i < 3; ++i) emb.index[emb.ids[static_cast<std::size_t>(i)]] = i;

  const std::string path = (fs::temp_directory_path() / "mss_emb.emb").string();
  save_external_embeddings(path, emb);
  ExternalEmbeddings loaded = load_external_embeddings(path);
  CHECK(loaded.dim == 512);
  CHECK(loaded.ids == emb.ids);
  CHECK((loaded.vectors.array() == emb.vectors.array()).all());

  // Byte-identical second save.
  const std::string path2 = (fs::temp_directory_path() / "mss_emb2.emb").string();
  save_external_embeddings(path2, loaded);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), {});
  std::string b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);

  // Duplicate id rejected at load.
  ExternalEmbeddings dup = emb;
  dup.ids[2] = "s0";
  save_external_embeddings(path2, dup);
  CHECK_THROWS_AS(load_external_embeddings(path2), DataError);
  fs::remove(path);
  fs::remove(path2);
}
