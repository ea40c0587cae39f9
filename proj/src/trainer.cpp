#include "mssplace/training/trainer.hpp"

#include <cstdio>
#include <fstream>

#include "mssplace/core/adam.hpp"
#include "mssplace/core/rng.hpp"

namespace mss {

namespace {

std::vector<int> sample_without_replacement(Rng& rng, int n, int k) {
  std::vector<int> pool(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < k; ++i) {
    const int j = rng.uniform_int(i, n - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(k));
  return pool;
}

bool has_positive_pair(const std::vector<int>& batch, const Mat& positions, double r_pos) {
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t j = i + 1; j < batch.size(); ++j) {
      const double d = (positions.row(batch[i]) - positions.row(batch[j])).norm();
      if (d <= r_pos) return true;
    }
  return false;
}

}  // namespace

TrainResult train(PlaceModel& model, const Dataset& dataset, const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ConfigError("train: epochs must be at least 1");
  if (!(cfg.margin > 0.0)) throw ConfigError("train: margin must be positive");
  if (!(cfg.r_pos > 0.0) || !(cfg.r_neg >= cfg.r_pos))
    throw ConfigError("train: need 0 < r_pos <= r_neg");
  if (cfg.train_on != "database" && cfg.train_on != "all")
    throw ConfigError("train: train_on must be 'database' or 'all'");

  const Dataset* train_set = &dataset;
  Dataset db_side;
  if (cfg.train_on == "database") {
    auto split = split_database_queries(dataset, cfg.split_ratio);
    db_side = std::move(split.first);
    train_set = &db_side;
  }
  const int n = static_cast<int>(train_set->size());
  if (n < 2) throw ConfigError("train: need at least two samples");

  if (model.needs_text_fit()) model.fit_text_models(*train_set);

  const Mat positions = train_set->positions();
  // The dataset must be able to produce at least one positive pair at all.
  {
    bool any = false;
    for (Index i = 0; i < positions.rows() && !any; ++i)
      for (Index j = i + 1; j < positions.rows() && !any; ++j)
        if ((positions.row(i) - positions.row(j)).norm() <= cfg.r_pos) any = true;
    if (!any)
      throw ConfigError("train: no sample pair lies within the positive radius; "
                        "no triplet can ever be mined");
  }

  std::vector<PreparedSample> prepared;
  prepared.reserve(static_cast<std::size_t>(n));
  for (const auto& s : train_set->samples) prepared.push_back(model.prepare(s));

  const TripletLossConfig loss_cfg{cfg.margin};
  AdamState adam;
  BatchSizer sizer = cfg.batch;
  sizer.current = sizer.initial;

  TrainResult result;
  result.log.reserve(static_cast<std::size_t>(cfg.epochs));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(Rng::derive(cfg.seed, 0x45504f43ull * 1000003ull + static_cast<std::uint64_t>(epoch)));
    std::vector<double> lr_by_branch(4);
    for (int b = 0; b < 4; ++b)
      lr_by_branch[static_cast<std::size_t>(b)] = cfg.lr.rate(static_cast<Branch>(b), epoch);
    std::vector<Real> lr_per_param(static_cast<std::size_t>(model.params().size()));
    for (int i = 0; i < model.params().size(); ++i)
      lr_per_param[static_cast<std::size_t>(i)] =
          static_cast<Real>(lr_by_branch[static_cast<std::size_t>(model.params().at(i).branch)]);

    const int bs = std::min(sizer.current, n);
    const int num_batches = (n + bs - 1) / bs;
    double loss_sum = 0.0;
    long mined = 0, zero_loss = 0;

    for (int batch_i = 0; batch_i < num_batches; ++batch_i) {
      std::vector<int> batch = sample_without_replacement(rng, n, bs);
      for (int attempt = 0; attempt < 10 && !has_positive_pair(batch, positions, cfg.r_pos);
           ++attempt)
        batch = sample_without_replacement(rng, n, bs);

      Tape tape;
      std::vector<Var> descs;
      descs.reserve(batch.size());
      for (int idx : batch)
        descs.push_back(model.descriptor(tape, prepared[static_cast<std::size_t>(idx)]));

      Mat desc_rows(static_cast<Index>(batch.size()), descs[0].rows());
      Mat batch_pos(static_cast<Index>(batch.size()), 2);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        desc_rows.row(static_cast<Index>(i)) = descs[i].value().col(0).transpose();
        batch_pos.row(static_cast<Index>(i)) = positions.row(batch[i]);
      }
      const PairMask mask = PairMask::from_positions(batch_pos, cfg.r_pos, cfg.r_neg);
      const auto triplets = batch_hard_mine(desc_rows, mask);
      if (triplets.empty()) continue;

      std::vector<Var> losses;
      losses.reserve(triplets.size());
      for (const auto& tr : triplets) {
        Var l = triplet_margin_loss(descs[static_cast<std::size_t>(tr.anchor)],
                                    descs[static_cast<std::size_t>(tr.positive)],
                                    descs[static_cast<std::size_t>(tr.negative)], loss_cfg);
        if (l.value()(0, 0) == 0.0) ++zero_loss;
        loss_sum += l.value()(0, 0);
        losses.push_back(l);
      }
      mined += static_cast<long>(triplets.size());

      Var mean_loss = mean_all(vcat(losses));
      tape.backward(mean_loss.id());
      adam_step(model.params(), adam, lr_per_param);
      model.clamp_constraints();
      model.params().zero_grads();
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = mined > 0 ? loss_sum / static_cast<double>(mined) : 0.0;
    entry.zero_loss_ratio =
        mined > 0 ? static_cast<double>(zero_loss) / static_cast<double>(mined) : 0.0;
    entry.batch_size = bs;
    entry.lr_image = lr_by_branch[static_cast<std::size_t>(Branch::kImage)];
    entry.lr_cloud = lr_by_branch[static_cast<std::size_t>(Branch::kCloud)];
    entry.lr_text = lr_by_branch[static_cast<std::size_t>(Branch::kText)];
    entry.lr_mask = lr_by_branch[static_cast<std::size_t>(Branch::kMask)];
    result.log.push_back(entry);
    result.total_triplets += mined;

    sizer.current = bs;
    sizer = update_batch_size(sizer, entry.zero_loss_ratio);
  }
  return result;
}

void write_epoch_log_csv(const std::string& path, const std::vector<EpochLog>& log) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write epoch log: " + path);
  os << "epoch,loss,zero_loss_ratio,batch_size,lr_image,lr_cloud,lr_text,lr_mask\n";
  char buf[256];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%d,%.10g,%.10g,%.10g,%.10g\n", e.epoch,
                  e.loss, e.zero_loss_ratio, e.batch_size, e.lr_image, e.lr_cloud, e.lr_text,
                  e.lr_mask);
    os << buf;
  }
  if (!os) throw DataError("epoch log write failed: " + path);
}

std::vector<EpochLog> read_epoch_log_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read epoch log: " + path);
  std::vector<EpochLog> log;
  std::string line;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    EpochLog e;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%d,%lf,%lf,%lf,%lf", &e.epoch, &e.loss,
                    &e.zero_loss_ratio, &e.batch_size, &e.lr_image, &e.lr_cloud, &e.lr_text,
                    &e.lr_mask) != 8)
      throw DataError("malformed epoch log row: " + line);
    log.push_back(e);
  }
  return log;
}

}  // namespace mss
