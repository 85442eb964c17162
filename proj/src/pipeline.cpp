#include "lphom/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "lphom/checkpoint.hpp"
#include "lphom/classifier.hpp"
#include "lphom/errors.hpp"
#include "lphom/fid.hpp"
#include "lphom/image_io.hpp"
#include "lphom/report.hpp"
#include "lphom/ssim.hpp"

namespace lphom {

namespace fs = std::filesystem;

namespace {

enum SeedStream : std::uint64_t {
  kVaeSeed = 1,
  kUnetSeed,
  kClassifierSeed,
  kSampleSeed,
  kNoiseImageSeed,
  kDiversitySeed,
  kEpsEvalSeed,
};

std::uint64_t stream_seed(const RunConfig& c, SeedStream s) { return mix_seed(c.seed, s); }

void say(const LogFn& log, const std::string& msg) {
  if (log) log(msg);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void require_file(const fs::path& p, const std::string& hint) {
  if (!fs::exists(p)) throw MissingArtifactError("missing " + p.string() + " (" + hint + ")");
}

std::vector<LabeledImage> load_split(const RunPaths& paths, std::optional<Split> split) {
  require_file(paths.manifest(), "run gen-data first");
  return load_dataset(paths.manifest(), split);
}

std::vector<Tensor> images_of(const std::vector<LabeledImage>& items) {
  std::vector<Tensor> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(it.image);
  return out;
}

void write_loss_csv(const fs::path& path, const std::vector<double>& loss) {
  const auto sm = smooth(loss, 50);
  std::ostringstream os;
  os << "step,loss,smoothed\n";
  char buf[96];
  for (std::size_t i = 0; i < loss.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.8g,%.8g\n", i, loss[i], sm[i]);
    os << buf;
  }
  write_text_file(path, os.str());
}

class MetricWriter {
 public:
  void add(const std::string& key, const std::string& value) { os_ << key << " = " << value << '\n'; }
  void add(const std::string& key, double value) { add(key, fmt("%.6f", value)); }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

struct LoadedVae {
  Vae<float> model;
  double scale;
};

LoadedVae load_vae(const RunConfig& c, const RunPaths& paths) {
  require_file(paths.vae_checkpoint(), "run train-vae first");
  const Checkpoint ck = load_checkpoint(paths.vae_checkpoint());
  LoadedVae out{Vae<float>(c.vae_model, 0), ck.latent_scale};
  restore_parameters(ck, out.model.params());
  out.model.set_latent_scale(ck.latent_scale);
  return out;
}

CondUNet<float> load_unet(const RunConfig& c, const RunPaths& paths) {
  require_file(paths.ldm_checkpoint(), "run train-ldm first");
  const Checkpoint ck = load_checkpoint(paths.ldm_checkpoint());
  CondUNet<float> unet(c.unet_model, 0);
  restore_parameters(ck, unet.params());
  return unet;
}

Tensor scale_tensor(Tensor t, double s) {
  for (auto& v : t.storage()) v = static_cast<float>(v * s);
  return t;
}

// Generates config.samples_per_cell decoded images for each selected cell.
CellSamples sample_cells(const RunConfig& c, const Vae<float>& vae, double scale, const CondUNet<float>& unet,
                         const std::array<bool, kNumCells>& which, const LogFn& log) {
  const NoiseSchedule sched = c.schedule();
  const auto predictor = unet.as_predictor();
  const int lc = c.vae_model.latent_channels, h = c.vae_model.latent_size();
  CellSamples out;
  for (int cell = 0; cell < kNumCells; ++cell) {
    if (!which[static_cast<std::size_t>(cell)]) continue;
    const ConditionLabel label = ConditionLabel::from_cell(cell);
    const Tensor z = ddim_sample<float>(predictor, label, c.sampler, sched,
                                        mix_seed(stream_seed(c, kSampleSeed), static_cast<std::uint64_t>(cell)),
                                        {c.samples_per_cell, lc, h, h});
    const Tensor x = vae.decode(scale_tensor(z, 1.0 / scale));
    auto& dst = out[static_cast<std::size_t>(cell)];
    for (int i = 0; i < x.dim(0); ++i) {
      const Tensor im = x.item(i);
      dst.push_back(quantize_8bit(im.reshaped({1, im.dim(2), im.dim(3)})));
    }
    say(log, "sampled " + to_string(label));
  }
  return out;
}

std::array<bool, kNumCells> held_out_mask(const RunConfig& c) {
  std::array<bool, kNumCells> m{};
  for (const auto& l : c.held_out) m[static_cast<std::size_t>(l.cell())] = true;
  return m;
}

}  // namespace

RunConfig resolve(const RunConfig& config) {
  RunConfig c = config;
  c.vae_model.image_size = c.image_size;
  c.classifier.image_size = c.image_size;
  c.unet_model.latent_channels = c.vae_model.latent_channels;
  c.unet_model.latent_size = c.vae_model.latent_size();
  c.unet_model.schedule_T = c.schedule_T;
  c.vae_train.seed = stream_seed(c, kVaeSeed);
  c.unet_train.seed = stream_seed(c, kUnetSeed);
  c.classifier.seed = stream_seed(c, kClassifierSeed);
  (void)c.schedule();
  return c;
}

DatasetManifest cmd_gen_data(const RunConfig& config, const RunPaths& paths, const LogFn& log) {
  const RunConfig c = resolve(config);
  DatasetConfig dc = DatasetConfig::with_scale(c.data_scale, c.seed);
  dc.image_size = c.image_size;
  const DatasetManifest m = generate_dataset(dc, paths.data_dir());
  say(log, "wrote " + std::to_string(m.records.size()) + " phantoms to " + paths.data_dir().string());
  return m;
}

void cmd_train_vae(const RunConfig& config, const RunPaths& paths, const LogFn& log) {
  const RunConfig c = resolve(config);
  const auto train = load_split(paths, Split::kTrain);
  const auto val = load_split(paths, Split::kVal);
  if (train.empty()) throw ShapeError("train-vae: the dataset has no training images");
  const auto train_images = images_of(train);
  say(log, "training VAE on " + std::to_string(train.size()) + " images");
  VaeTrainResult res = train_vae(train_images, c.vae_model, c.vae_train, [&](int step, double loss) {
    if (step % 250 == 0) say(log, "vae step " + std::to_string(step) + " loss " + fmt("%.6f", loss));
  });
  const Tensor latents = encode_means(res.model, train_images);
  const double scale = latent_scale_for(latents);
  res.model.set_latent_scale(scale);

  MetricWriter mw;
  const auto sm = smooth(res.loss_history, 50);
  mw.add("train_images", std::to_string(train.size()));
  mw.add("val_images", std::to_string(val.size()));
  mw.add("loss_initial_smoothed", sm.front());
  mw.add("loss_final_smoothed", sm.back());
  mw.add("latent_scale", scale);
  if (!val.empty()) {
    const auto val_images = images_of(val);
    mw.add("val_mse", reconstruction_mse(res.model, val_images));
    const Tensor vl = encode_means(res.model, val_images);
    const int ch = vl.dim(1);
    const std::size_t plane = static_cast<std::size_t>(vl.dim(2)) * vl.dim(3);
    for (int k = 0; k < ch; ++k) {
      double s = 0, s2 = 0;
      std::size_t n = 0;
      for (int b = 0; b < vl.dim(0); ++b)
        for (std::size_t i = 0; i < plane; ++i) {
          const double v = vl[(static_cast<std::size_t>(b) * ch + k) * plane + i];
          s += v;
          s2 += v * v;
          ++n;
        }
      const double m = s / n;
      mw.add("val_latent_std_" + std::to_string(k), std::sqrt(std::max(0.0, s2 / n - m * m)));
    }
  }
  Checkpoint ck;
  ck.config = c.to_text();
  ck.latent_scale = scale;
  add_parameters(ck, res.model.params());
  save_checkpoint(paths.vae_checkpoint(), ck);
  write_loss_csv(paths.root / "loss_vae.csv", res.loss_history);
  write_text_file(paths.root / "vae_metrics.txt", mw.str());
  say(log, "saved " + paths.vae_checkpoint().string());
}

void cmd_train_ldm(const RunConfig& config, const RunPaths& paths, const LogFn& log) {
  const RunConfig c = resolve(config);
  const LoadedVae vae = load_vae(c, paths);
  const auto all_train = load_split(paths, Split::kTrain);
  const auto all_val = load_split(paths, Split::kVal);
  std::vector<LabeledImage> train, val;
  for (const auto& it : all_train)
    if (!c.is_held_out(it.label)) train.push_back(it);
  for (const auto& it : all_val)
    if (!c.is_held_out(it.label)) val.push_back(it);
  if (train.empty()) throw ShapeError("train-ldm: no training images outside the held-out cells");

  auto encode = [&](const std::vector<LabeledImage>& items, std::vector<ConditionLabel>& labels) {
    for (const auto& it : items) labels.push_back(it.label);
    return scale_tensor(encode_means(vae.model, images_of(items)), vae.scale);
  };
  std::vector<ConditionLabel> train_labels, val_labels;
  const Tensor train_lat = encode(train, train_labels);
  const NoiseSchedule sched = c.schedule();
  say(log, "training U-Net on " + std::to_string(train.size()) + " latents");
  LdmTrainResult res = train_ldm(train_lat, train_labels, c.unet_model, sched, c.unet_train, [&](int step, double loss) {
    if (step % 250 == 0) say(log, "ldm step " + std::to_string(step) + " loss " + fmt("%.6f", loss));
  });

  // Audit of every label drawn into the training stream.
  std::array<long, kNumCells> drawn{};
  long held_out_drawn = 0;
  for (const auto& l : res.label_stream) {
    ++drawn[static_cast<std::size_t>(l.cell())];
    held_out_drawn += c.is_held_out(l);
  }
  std::ostringstream audit;
  audit << "# label audit: cell\theld_out\tdrawn\n";
  for (int cell = 0; cell < kNumCells; ++cell) {
    const ConditionLabel l = ConditionLabel::from_cell(cell);
    audit << to_string(l) << '\t' << (c.is_held_out(l) ? "yes" : "no") << '\t' << drawn[static_cast<std::size_t>(cell)]
          << '\n';
  }
  audit << "held_out_drawn\t" << held_out_drawn << '\n';
  write_text_file(paths.root / "label_audit.tsv", audit.str());

  MetricWriter mw;
  const auto sm = smooth(res.loss_history, 50);
  mw.add("train_latents", std::to_string(train.size()));
  mw.add("val_latents", std::to_string(val.size()));
  mw.add("loss_initial_smoothed", sm.front());
  mw.add("loss_final_smoothed", sm.back());
  mw.add("held_out_drawn", std::to_string(held_out_drawn));
  if (!val.empty()) {
    const Tensor val_lat = encode(val, val_labels);
    const std::uint64_t es = stream_seed(c, kEpsEvalSeed);
    mw.add("eps_loss_val", eval_eps_loss(res.model, val_lat, val_labels, sched, es));
    const CondUNet<float> fresh(c.unet_model, c.unet_train.seed);
    mw.add("eps_loss_val_untrained", eval_eps_loss(fresh, val_lat, val_labels, sched, es));
  }
  Checkpoint ck;
  ck.config = c.to_text();
  ck.latent_scale = vae.scale;
  add_parameters(ck, res.model.params());
  save_checkpoint(paths.ldm_checkpoint(), ck);
  write_loss_csv(paths.root / "loss_ldm.csv", res.loss_history);
  write_text_file(paths.root / "ldm_metrics.txt", mw.str());
  say(log, "saved " + paths.ldm_checkpoint().string());
}

CellSamples cmd_sample_grid(const RunConfig& config, const RunPaths& paths, const LogFn& log) {
  const RunConfig c = resolve(config);
  const LoadedVae vae = load_vae(c, paths);
  const CondUNet<float> unet = load_unet(c, paths);
  std::array<bool, kNumCells> all;
  all.fill(true);
  CellSamples samples = sample_cells(c, vae.model, vae.scale, unet, all, log);
  std::vector<Tensor> firsts;
  for (int cell = 0; cell < kNumCells; ++cell) {
    const auto& imgs = samples[static_cast<std::size_t>(cell)];
    const fs::path dir = paths.samples_dir() / cell_slug(ConditionLabel::from_cell(cell));
    fs::create_directories(dir);
    for (std::size_t i = 0; i < imgs.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "sample_%03zu.png", i);
      write_png_gray(dir / name, imgs[i]);
    }
    firsts.push_back(imgs.front());
  }
  const RgbImage grid = grid_montage(firsts, held_out_mask(c));
  write_png_rgb(paths.grid(), grid.width, grid.height, grid.rgb);
  say(log, "wrote " + paths.grid().string());
  return samples;
}

void cmd_eval(const RunConfig& config, const RunPaths& paths, const LogFn& log, bool held_out_only,
              const CellSamples* given) {
  const RunConfig c = resolve(config);
  const LoadedVae vae = load_vae(c, paths);
  const auto real = load_split(paths, std::nullopt);
  const auto held = held_out_mask(c);

  CellSamples owned;
  if (!given) {
    const CondUNet<float> unet = load_unet(c, paths);
    std::array<bool, kNumCells> which;
    for (int cell = 0; cell < kNumCells; ++cell) which[static_cast<std::size_t>(cell)] = !held_out_only || held[static_cast<std::size_t>(cell)];
    owned = sample_cells(c, vae.model, vae.scale, unet, which, log);
    given = &owned;
  }
  const CellSamples& samples = *given;

  // Condition classifier, trained on fresh phantoms and checked on the dataset.
  say(log, "training condition classifier");
  const ClassifierTrainResult clf = train_condition_classifier(c.classifier, {}, &vae.model);
  std::vector<Tensor> real_images;
  std::vector<ConditionLabel> real_labels;
  for (const auto& it : real) {
    real_images.push_back(it.image);
    real_labels.push_back(it.label);
  }
  MetricWriter summary;
  if (!real_images.empty()) {
    const ClassifierAccuracy acc = classifier_accuracy(clf.model, real_images, real_labels);
    summary.add("classifier_pathology_accuracy", acc.pathology);
    summary.add("classifier_modality_accuracy", acc.modality);
  }

  CellTable extrap_table;
  std::ostringstream extrap_csv;
  extrap_csv << "pathology,modality,held_out,samples,pathology_match,modality_match,joint_match\n";
  double held_joint = 0;
  int held_cells = 0;
  double held_min = 1.0;
  for (int cell = 0; cell < kNumCells; ++cell) {
    const auto& imgs = samples[static_cast<std::size_t>(cell)];
    if (imgs.empty()) continue;
    const ConditionLabel l = ConditionLabel::from_cell(cell);
    const auto pred = clf.model.classify(imgs);
    double pm = 0, mm = 0, jm = 0;
    for (const auto& p : pred) {
      pm += p.pathology == l.pathology;
      mm += p.modality == l.modality;
      jm += p == l;
    }
    const double n = static_cast<double>(pred.size());
    pm /= n;
    mm /= n;
    jm /= n;
    const bool h = held[static_cast<std::size_t>(cell)];
    extrap_csv << to_string(l.pathology) << ',' << to_string(l.modality) << ',' << (h ? "yes" : "no") << ','
               << pred.size() << ',' << fmt("%.4f", pm) << ',' << fmt("%.4f", mm) << ',' << fmt("%.4f", jm) << '\n';
    extrap_table[static_cast<std::size_t>(cell)] = fmt("%.3f", jm) + (h ? "*" : "");
    if (h) {
      held_joint += jm;
      ++held_cells;
      held_min = std::min(held_min, jm);
    }
  }
  write_text_file(paths.root / "extrapolation.csv", extrap_csv.str());
  write_text_file(paths.root / "extrapolation.txt",
                  table_text("Joint condition-match rate of generated samples (* = held out of training)", extrap_table));
  if (held_cells > 0) {
    summary.add("extrapolation_mean_joint", held_joint / held_cells);
    summary.add("extrapolation_min_joint", held_min);
  }
  if (held_out_only) {
    write_text_file(paths.root / "extrapolation_summary.txt", summary.str());
    return;
  }

  // Real reference sets per cell.
  std::array<std::vector<Tensor>, kNumCells> real_val, real_train;
  for (const auto& it : real) {
    auto& dst = it.split == Split::kVal ? real_val : real_train;
    dst[static_cast<std::size_t>(it.label.cell())].push_back(it.image);
  }
  std::vector<Tensor> noise;
  {
    Rng rng(stream_seed(c, kNoiseImageSeed));
    for (int i = 0; i < c.samples_per_cell; ++i) {
      noise.push_back(quantize_8bit(Tensor::uniform({1, c.image_size, c.image_size}, rng, 0.0f, 1.0f)));
    }
  }

  // Realism ordering in one feature space: per trained cell, FID of the
  // generated set against uniform noise and against the generated set of the
  // next pathology with the same modality.
  struct Realism {
    int cells = 0, noise_wins = 0, passing = 0;
    CellTable fid_table;
  };
  std::ostringstream realism;
  realism << "features,pathology,modality,reference,fid_generated,fid_noise,fid_wrong_pathology,fid_real_split,"
             "beats_noise,beats_wrong_pathology\n";
  auto realism_in = [&](FeatureKind kind) {
    const FeatureExtractor fx =
        kind == FeatureKind::kVaeEncoder ? FeatureExtractor::vae_encoder(vae.model) : FeatureExtractor::random_conv();
    const FeatureStats noise_stats = feature_stats(noise, fx);
    std::array<std::optional<FeatureStats>, kNumCells> gen_stats;
    for (int cell = 0; cell < kNumCells; ++cell) {
      if (samples[static_cast<std::size_t>(cell)].size() >= 2) {
        gen_stats[static_cast<std::size_t>(cell)] = feature_stats(samples[static_cast<std::size_t>(cell)], fx);
      }
    }
    Realism r;
    for (int cell = 0; cell < kNumCells; ++cell) {
      const ConditionLabel l = ConditionLabel::from_cell(cell);
      const auto& val = real_val[static_cast<std::size_t>(cell)];
      const auto& tr = real_train[static_cast<std::size_t>(cell)];
      const auto& gs = gen_stats[static_cast<std::size_t>(cell)];
      if (held[static_cast<std::size_t>(cell)] || tr.empty() || !gs) continue;
      std::vector<Tensor> ref = val;
      std::string ref_kind = "val";
      if (ref.size() < 2) {
        ref = tr;
        ref.insert(ref.end(), val.begin(), val.end());
        ref_kind = "all";
      }
      if (ref.size() < 2) continue;
      const FeatureStats rs = feature_stats(ref, fx);
      const double f_gen = fid(rs, *gs);
      const double f_noise = fid(rs, noise_stats);
      const ConditionLabel wrong{static_cast<Pathology>((static_cast<int>(l.pathology) + 1) % kNumPathologies),
                                 l.modality};
      const auto& ws = gen_stats[static_cast<std::size_t>(wrong.cell())];
      const double f_wrong = ws ? fid(rs, *ws) : NAN;
      std::string f_split = "-";
      if (val.size() >= 2 && tr.size() >= 2) f_split = fmt("%.6f", fid(feature_stats(tr, fx), feature_stats(val, fx)));
      const bool beats_noise = f_gen < f_noise;
      const bool beats_wrong = ws && f_gen < f_wrong;
      ++r.cells;
      r.noise_wins += beats_noise;
      r.passing += beats_noise && beats_wrong;
      r.fid_table[static_cast<std::size_t>(cell)] = fmt("%.4f", f_gen);
      realism << to_string(kind) << ',' << to_string(l.pathology) << ',' << to_string(l.modality) << ',' << ref_kind
              << ',' << fmt("%.6f", f_gen) << ',' << fmt("%.6f", f_noise) << ','
              << (ws ? fmt("%.6f", f_wrong) : "-") << ',' << f_split << ',' << (beats_noise ? "yes" : "no") << ','
              << (beats_wrong ? "yes" : "no") << '\n';
    }
    return r;
  };
  std::map<FeatureKind, Realism> by_kind;
  for (const FeatureKind kind : {FeatureKind::kRandomConv, FeatureKind::kVaeEncoder}) by_kind[kind] = realism_in(kind);
  write_table(paths.root, "fid_table",
              std::string("FID by pathology and modality (features: ") + to_string(c.features) + ")",
              by_kind[c.features].fid_table);
  write_text_file(paths.root / "realism.csv", realism.str());
  auto add_realism = [&](const std::string& prefix, const Realism& r) {
    summary.add(prefix + "cells", std::to_string(r.cells));
    summary.add(prefix + "cells_beating_noise", std::to_string(r.noise_wins));
    summary.add(prefix + "cells_passing", std::to_string(r.passing));
    if (r.cells > 0) summary.add(prefix + "fraction", static_cast<double>(r.passing) / r.cells);
  };
  summary.add("realism_features", to_string(c.realism_features));
  add_realism("realism_", by_kind[c.realism_features]);
  for (const auto& [kind, r] : by_kind) add_realism("realism_" + std::string(to_string(kind)) + "_", r);

  CellTable ms_table;
  const SsimParams sp;
  double ms_min = 1.0, ms_max = 0.0;
  for (int cell = 0; cell < kNumCells; ++cell) {
    const auto& imgs = samples[static_cast<std::size_t>(cell)];
    if (imgs.size() < 2) continue;
    const DiversityStats d = diversity_report(imgs, sp, c.msssim_pairs,
                                              mix_seed(stream_seed(c, kDiversitySeed), static_cast<std::uint64_t>(cell)));
    ms_table[static_cast<std::size_t>(cell)] = d.format();
    ms_min = std::min(ms_min, d.mean);
    ms_max = std::max(ms_max, d.mean);
  }
  write_table(paths.root, "msssim_table", "MS-SSIM of generated samples by pathology and modality (mean ± std)",
              ms_table);
  summary.add("msssim_mean_min", ms_min);
  summary.add("msssim_mean_max", ms_max);
  write_text_file(paths.root / "eval_summary.txt", summary.str());
  say(log, "wrote evaluation reports to " + paths.root.string());
}

void cmd_all(const RunConfig& config, const RunPaths& paths, const LogFn& log) {
  cmd_gen_data(config, paths, log);
  cmd_train_vae(config, paths, log);
  cmd_train_ldm(config, paths, log);
  const CellSamples samples = cmd_sample_grid(config, paths, log);
  cmd_eval(config, paths, log, false, &samples);
}

std::string read_metric(const fs::path& file, const std::string& key) {
  std::istringstream in(read_text_file(file));
  std::string line;
  const std::string prefix = key + " = ";
  while (std::getline(in, line)) {
    if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
  }
  throw MissingArtifactError("metric " + key + " not found in " + file.string());
}

}  // namespace lphom
