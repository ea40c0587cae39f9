#include "mssplace/model/place_model.hpp"

#include <algorithm>
#include <filesystem>

namespace fs = std::filesystem;

namespace mss {

std::vector<Modality> parse_modalities(const std::string& spec) {
  std::vector<Modality> out;
  auto push = [&](Modality m) {
    if (std::find(out.begin(), out.end(), m) != out.end())
      throw ConfigError("modalities: duplicate entry in '" + spec + "'");
    out.push_back(m);
  };
  for (char ch : spec) {
    switch (ch) {
      case 'L': case 'l': push(Modality::kCloud); break;
      case 'I': case 'i': push(Modality::kImage); break;
      case 'S': case 's': push(Modality::kMask); break;
      case 'T': case 't': push(Modality::kText); break;
      case '+': case ' ': break;
      default:
        throw ConfigError(std::string("modalities: unknown symbol '") + ch + "' in '" + spec +
                          "' (use L, I, S, T joined by '+')");
    }
  }
  if (out.empty()) throw ConfigError("modalities: at least one of L, I, S, T required");
  return out;
}

std::string modalities_name(const std::vector<Modality>& mods) {
  std::string s;
  for (Modality m : mods) {
    if (!s.empty()) s.push_back('+');
    switch (m) {
      case Modality::kCloud: s.push_back('L'); break;
      case Modality::kImage: s.push_back('I'); break;
      case Modality::kMask: s.push_back('S'); break;
      case Modality::kText: s.push_back('T'); break;
    }
  }
  return s;
}

std::vector<int> camera_set_indices(const std::string& set_name, int available) {
  std::string n;
  for (char ch : set_name) n.push_back(static_cast<char>(std::tolower(ch)));
  if (available < 1) throw ConfigError("camera set: dataset provides no cameras");
  if (n == "f") return {0};
  if (n == "a") {
    std::vector<int> all(static_cast<std::size_t>(available));
    for (int i = 0; i < available; ++i) all[static_cast<std::size_t>(i)] = i;
    return all;
  }
  if (n == "f+b") {
    if (available < 2 || available % 2 != 0)
      throw ConfigError("camera set F+B needs an even camera count >= 2, have " +
                        std::to_string(available));
    return {0, available / 2};
  }
  if (n == "l+r") {
    if (available < 4)
      throw ConfigError("camera set L+R needs at least 4 cameras, have " +
                        std::to_string(available));
    return {available / 4, available - available / 4};
  }
  throw ConfigError("unknown camera set '" + set_name + "' (use F, F+B, L+R or A)");
}

PlaceModel::PlaceModel(ModelConfig config) : cfg_(std::move(config)) {
  modalities_ = parse_modalities(cfg_.modalities);
  cameras_ = camera_set_indices(cfg_.camera_set, cfg_.dataset_cameras);
  for (int c : cameras_)
    if (c >= cfg_.dataset_cameras)
      throw ConfigError("camera set exceeds available cameras");
  if (cfg_.embedding_dim <= 0) throw ConfigError("model: embedding_dim must be positive");
  if (cfg_.mask_classes < 2) throw ConfigError("model: mask_classes must be at least 2");

  Rng init(Rng::derive(cfg_.init_seed, 0x4d4f44454cull));
  const int k = static_cast<int>(cameras_.size());
  const FusionSpec fusion_spec = parse_fusion(cfg_.fusion);
  const FusionSpec text_fusion_spec = parse_fusion(cfg_.text_fusion);
  if (text_fusion_spec.kind != FusionKind::kAdd && text_fusion_spec.kind != FusionKind::kConcat)
    throw ConfigError("text fusion supports only add or concat");

  if (!cfg_.external_text_embeddings.empty() && uses(Modality::kText))
    external_text_ = load_external_embeddings(cfg_.external_text_embeddings);

  for (Modality m : modalities_) {
    switch (m) {
      case Modality::kCloud: {
        CnnEncoderConfig c;
        c.in_channels = 1;
        c.stage_widths = cfg_.cloud_widths;
        c.output_dim = cfg_.embedding_dim;
        c.gem_p_init = cfg_.gem_p_init;
        c.gem_eps = cfg_.gem_eps;
        cloud_enc_.emplace(store_, "cloud.", c, static_cast<int>(Branch::kCloud), init);
        break;
      }
      case Modality::kImage: {
        CnnEncoderConfig c;
        c.in_channels = 3;
        c.stage_widths = cfg_.image_widths;
        c.output_dim = cfg_.embedding_dim;
        c.gem_p_init = cfg_.gem_p_init;
        c.gem_eps = cfg_.gem_eps;
        image_enc_.emplace(store_, "image.", c, static_cast<int>(Branch::kImage), init);
        image_fusion_.emplace(store_, "image.fusion.", fusion_spec, k, cfg_.embedding_dim,
                              static_cast<int>(Branch::kImage), init);
        break;
      }
      case Modality::kMask: {
        CnnEncoderConfig c;
        c.in_channels = 1;
        c.stage_widths = cfg_.mask_widths;
        c.output_dim = cfg_.embedding_dim;
        c.gem_p_init = cfg_.gem_p_init;
        c.gem_eps = cfg_.gem_eps;
        mask_enc_.emplace(store_, "mask.", c, static_cast<int>(Branch::kMask), init);
        mask_fusion_.emplace(store_, "mask.fusion.", fusion_spec, k, cfg_.embedding_dim,
                             static_cast<int>(Branch::kMask), init);
        break;
      }
      case Modality::kText: {
        if (external_text_) {
          text_enc_.emplace(store_, "text.", static_cast<int>(external_text_->dim),
                            cfg_.embedding_dim, static_cast<int>(Branch::kText), init);
        } else {
          text_enc_.emplace(store_, "text.", cfg_.text_pca_components, cfg_.embedding_dim,
                            static_cast<int>(Branch::kText), init);
          text_fusion_.emplace(store_, "text.fusion.", text_fusion_spec, k, cfg_.embedding_dim,
                               static_cast<int>(Branch::kText), init);
        }
        break;
      }
    }
  }
  for (int i = 0; i < store_.size(); ++i) {
    auto& p = store_.at(i);
    if (p.name.size() > 5 && p.name.compare(p.name.size() - 5, 5, "gem.p") == 0)
      gem_params_.push_back(&p);
  }
}

bool PlaceModel::uses(Modality m) const {
  return std::find(modalities_.begin(), modalities_.end(), m) != modalities_.end();
}

bool PlaceModel::needs_text_fit() const {
  return uses(Modality::kText) && !external_text_ && !tfidf_.fitted();
}

void PlaceModel::fit_text_models(const Dataset& train) {
  if (!uses(Modality::kText) || external_text_) return;
  std::vector<std::string> corpus;
  for (const auto& s : train.samples)
    for (int c : cameras_) {
      if (c >= static_cast<int>(s.texts.size()))
        throw DataError("sample " + s.id + " lacks a text for camera " + std::to_string(c));
      corpus.push_back(s.texts[static_cast<std::size_t>(c)]);
    }
  tfidf_ = fit_tfidf(corpus);
  Mat rows(static_cast<Index>(corpus.size()), tfidf_.dim());
  for (std::size_t i = 0; i < corpus.size(); ++i)
    rows.row(static_cast<Index>(i)) = transform_tfidf(tfidf_, corpus[i]).transpose();
  pca_ = fit_pca(rows, cfg_.text_pca_components);
}

void PlaceModel::set_text_models(TfidfModel tfidf, PcaModel pca) {
  tfidf_ = std::move(tfidf);
  pca_ = std::move(pca);
}

PreparedSample PlaceModel::prepare(const PlaceSample& sample) const {
  PreparedSample out;
  out.sample = &sample;
  if (uses(Modality::kCloud)) {
    if (!sample.has_cloud()) throw DataError("sample " + sample.id + " lacks a point cloud");
    out.bev = bev_image(sample.cloud, cfg_.bev);
  }
  if (uses(Modality::kImage)) {
    for (int c : cameras_)
      if (c >= static_cast<int>(sample.images.size()))
        throw DataError("sample " + sample.id + " lacks an image for camera " +
                        std::to_string(c));
  }
  if (uses(Modality::kMask)) {
    for (int c : cameras_) {
      if (c >= static_cast<int>(sample.masks.size()))
        throw DataError("sample " + sample.id + " lacks a mask for camera " + std::to_string(c));
      ImageInput norm = sample.masks[static_cast<std::size_t>(c)];
      norm.values /= static_cast<Real>(cfg_.mask_classes);
      out.masks_normalized.push_back(std::move(norm));
    }
  }
  if (uses(Modality::kText)) {
    if (external_text_) {
      out.text_features.push_back(external_text_->get(sample.id));
    } else {
      if (!tfidf_.fitted() || !pca_.fitted())
        throw ConfigError("text models not fitted; call fit_text_models first");
      for (int c : cameras_) {
        if (c >= static_cast<int>(sample.texts.size()))
          throw DataError("sample " + sample.id + " lacks a text for camera " +
                          std::to_string(c));
        out.text_features.push_back(
            project_pca(pca_, transform_tfidf(tfidf_, sample.texts[static_cast<std::size_t>(c)])));
      }
    }
  }
  return out;
}

Var PlaceModel::modality_descriptor(Tape& tape, Modality m, const PreparedSample& prep) const {
  const PlaceSample& s = *prep.sample;
  switch (m) {
    case Modality::kCloud:
      return cloud_enc_->encode(tape, *prep.bev);
    case Modality::kImage: {
      std::vector<Var> embs;
      embs.reserve(cameras_.size());
      for (int c : cameras_)
        embs.push_back(image_enc_->encode(tape, s.images[static_cast<std::size_t>(c)]));
      return image_fusion_->fuse(tape, embs);
    }
    case Modality::kMask: {
      std::vector<Var> embs;
      embs.reserve(prep.masks_normalized.size());
      for (const auto& mask : prep.masks_normalized)
        embs.push_back(mask_enc_->encode(tape, mask));
      return mask_fusion_->fuse(tape, embs);
    }
    case Modality::kText: {
      std::vector<Var> embs;
      embs.reserve(prep.text_features.size());
      for (const auto& f : prep.text_features) embs.push_back(text_enc_->encode(tape, f));
      if (external_text_) return embs[0];
      return text_fusion_->fuse(tape, embs);
    }
  }
  throw ConfigError("unhandled modality");
}

Var PlaceModel::descriptor(Tape& tape, const PreparedSample& prep) const {
  std::vector<Var> parts;
  parts.reserve(modalities_.size());
  for (Modality m : modalities_) parts.push_back(modality_descriptor(tape, m, prep));
  return aggregate_modalities(tape, parts, cfg_.l2_normalize_segments);
}

GlobalDescriptor PlaceModel::describe(const PlaceSample& sample) const {
  PreparedSample prep = prepare(sample);
  Tape tape;
  std::vector<std::pair<std::string, Vec>> parts;
  for (Modality m : modalities_) {
    Var d = modality_descriptor(tape, m, prep);
    parts.emplace_back(modalities_name({m}), d.value().col(0));
  }
  return aggregate_modalities(parts, cfg_.l2_normalize_segments);
}

int PlaceModel::modality_dim(Modality m) const {
  switch (m) {
    case Modality::kCloud: return cfg_.embedding_dim;
    case Modality::kImage: return image_fusion_->output_dim();
    case Modality::kMask: return mask_fusion_->output_dim();
    case Modality::kText:
      return external_text_ ? cfg_.embedding_dim : text_fusion_->output_dim();
  }
  return 0;
}

int PlaceModel::descriptor_dim() const {
  int total = 0;
  for (Modality m : modalities_) total += modality_dim(m);
  return total;
}

std::vector<DescriptorSegment> PlaceModel::layout() const {
  std::vector<DescriptorSegment> out;
  Index off = 0;
  for (Modality m : modalities_) {
    const Index len = modality_dim(m);
    out.push_back({modalities_name({m}), off, len});
    off += len;
  }
  return out;
}

void PlaceModel::clamp_constraints() {
  for (Parameter* p : gem_params_)
    p->value(0, 0) = std::max(p->value(0, 0), Real(1e-2));
}

void PlaceModel::save_artifacts(const std::string& dir) const {
  fs::create_directories(dir);
  store_.save((fs::path(dir) / "params.pkt").string());
  if (tfidf_.fitted()) tfidf_.save((fs::path(dir) / "tfidf.tfm").string());
  if (pca_.fitted()) pca_.save((fs::path(dir) / "pca.pcm").string());
}

void PlaceModel::load_artifacts(const std::string& dir) {
  store_.load((fs::path(dir) / "params.pkt").string());
  const auto tf = fs::path(dir) / "tfidf.tfm";
  const auto pc = fs::path(dir) / "pca.pcm";
  if (fs::exists(tf)) tfidf_ = TfidfModel::load(tf.string());
  if (fs::exists(pc)) pca_ = PcaModel::load(pc.string());
  if (needs_text_fit())
    throw DataError("checkpoint lacks fitted text models required by the configuration");
}

}  // namespace mss
