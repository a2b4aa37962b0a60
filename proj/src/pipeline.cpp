#include "mint/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "mint/checkpoint.hpp"

namespace mint {

namespace fs = std::filesystem;
using nlohmann::json;

void RunConfig::validate() const {
  model.validate();
  if (optimizer.base_lr <= 0) throw std::runtime_error("base_lr must be > 0");
  if (optimizer.batch_size < 1 || optimizer.epochs_stage1 < 1 ||
      optimizer.epochs_stage2 < 1 || optimizer.warmup_steps < 0)
    throw std::runtime_error("optimizer counts must be positive");
  if (vocab_max_size < kNumSpecials + 1)
    throw std::runtime_error("vocab_max_size too small");
  if (data.train_manifest.empty() && data.synth_n < 1)
    throw std::runtime_error("no training data configured");
}

namespace {

json config_to_json_obj(const RunConfig& c) {
  json j;
  j["model"] = {{"num_queries", c.model.num_queries},
                {"hidden_dim", c.model.hidden_dim},
                {"num_blocks", c.model.num_blocks},
                {"num_heads", c.model.num_heads},
                {"cross_attention_period", c.model.cross_attention_period},
                {"ffn_dim", c.model.ffn_dim},
                {"contrastive_proj_dim", c.model.contrastive_proj_dim},
                {"max_text_len", c.model.max_text_len},
                {"audio_feat_dim", c.model.audio_feat_dim},
      {"init_scale", c.model.init_scale}};
  j["lm"] = {{"lm_dim", c.lm.lm_dim},
             {"lm_blocks", c.lm.lm_blocks},
             {"lm_heads", c.lm.lm_heads},
             {"ffn_dim", c.lm.ffn_dim},
             {"max_positions", c.lm.max_positions},
             {"pretrain_steps", c.lm.pretrain_steps},
             {"pretrain_lr", c.lm.pretrain_lr},
             {"pretrain_batch", c.lm.pretrain_batch},
             {"seed", c.lm.seed}};
  j["optimizer"] = {{"base_lr", c.optimizer.base_lr},
      {"clip_norm", c.optimizer.clip_norm},
                    {"warmup_steps", c.optimizer.warmup_steps},
                    {"batch_size", c.optimizer.batch_size},
                    {"batch_size_stage2", c.optimizer.batch_size_stage2},
                    {"epochs_stage1", c.optimizer.epochs_stage1},
                    {"epochs_stage2", c.optimizer.epochs_stage2},
                    {"schedule", "linear-decay"}};
  j["enabled_losses"] = {{"alc", c.enabled_losses.alc},
                         {"alm", c.enabled_losses.alm},
                         {"atg", c.enabled_losses.atg},
                         {"alc_symmetric", c.enabled_losses.alc_symmetric}};
  j["data"] = {{"train_manifest", c.data.train_manifest},
               {"eval_manifest", c.data.eval_manifest},
               {"synth_n", c.data.synth_n},
               {"synth_seed", c.data.synth_seed}};
  j["seed"] = c.seed;
  j["vocab_max_size"] = c.vocab_max_size;
  return j;
}

template <typename T>
void maybe(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

RunConfig config_from_json_obj(const json& j) {
  RunConfig c;
  if (j.contains("model")) {
    const json& m = j["model"];
    maybe(m, "num_queries", c.model.num_queries);
    maybe(m, "hidden_dim", c.model.hidden_dim);
    maybe(m, "num_blocks", c.model.num_blocks);
    maybe(m, "num_heads", c.model.num_heads);
    maybe(m, "cross_attention_period", c.model.cross_attention_period);
    maybe(m, "ffn_dim", c.model.ffn_dim);
    maybe(m, "contrastive_proj_dim", c.model.contrastive_proj_dim);
    maybe(m, "max_text_len", c.model.max_text_len);
    maybe(m, "audio_feat_dim", c.model.audio_feat_dim);
    maybe(m, "init_scale", c.model.init_scale);
  }
  if (j.contains("lm")) {
    const json& m = j["lm"];
    maybe(m, "lm_dim", c.lm.lm_dim);
    maybe(m, "lm_blocks", c.lm.lm_blocks);
    maybe(m, "lm_heads", c.lm.lm_heads);
    maybe(m, "ffn_dim", c.lm.ffn_dim);
    maybe(m, "max_positions", c.lm.max_positions);
    maybe(m, "pretrain_steps", c.lm.pretrain_steps);
    maybe(m, "pretrain_lr", c.lm.pretrain_lr);
    maybe(m, "pretrain_batch", c.lm.pretrain_batch);
    maybe(m, "seed", c.lm.seed);
  }
  if (j.contains("optimizer")) {
    const json& m = j["optimizer"];
    maybe(m, "base_lr", c.optimizer.base_lr);
    maybe(m, "clip_norm", c.optimizer.clip_norm);
    maybe(m, "warmup_steps", c.optimizer.warmup_steps);
    maybe(m, "batch_size", c.optimizer.batch_size);
    maybe(m, "batch_size_stage2", c.optimizer.batch_size_stage2);
    maybe(m, "epochs_stage1", c.optimizer.epochs_stage1);
    maybe(m, "epochs_stage2", c.optimizer.epochs_stage2);
  }
  if (j.contains("enabled_losses")) {
    const json& m = j["enabled_losses"];
    maybe(m, "alc", c.enabled_losses.alc);
    maybe(m, "alm", c.enabled_losses.alm);
    maybe(m, "atg", c.enabled_losses.atg);
    maybe(m, "alc_symmetric", c.enabled_losses.alc_symmetric);
  }
  if (j.contains("data")) {
    const json& m = j["data"];
    maybe(m, "train_manifest", c.data.train_manifest);
    maybe(m, "eval_manifest", c.data.eval_manifest);
    maybe(m, "synth_n", c.data.synth_n);
    maybe(m, "synth_seed", c.data.synth_seed);
  }
  maybe(j, "seed", c.seed);
  maybe(j, "vocab_max_size", c.vocab_max_size);
  return c;
}

}  // namespace

RunConfig run_config_from_json(const std::string& text) {
  return config_from_json_obj(json::parse(text));
}

std::string run_config_to_json(const RunConfig& cfg) {
  return config_to_json_obj(cfg).dump(2);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read config: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return run_config_from_json(ss.str());
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write config: " + path);
  f << run_config_to_json(cfg) << "\n";
}

Adam::Adam(double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(ParamStore& store, double lr) {
  ++t_;
  for (auto& [name, v] : store.values) {
    const Mat& g = store.grads.at(name);
    if (!state_.has("m." + name)) {
      state_.add("m." + name, Mat::Zero(v.rows(), v.cols()));
      state_.add("v." + name, Mat::Zero(v.rows(), v.cols()));
    }
    Mat& m = state_.values.at("m." + name);
    Mat& s = state_.values.at("v." + name);
    m = beta1_ * m + (1.0 - beta1_) * g;
    s = beta2_ * s + (1.0 - beta2_) * g.cwiseProduct(g);
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    Mat mhat = m / bc1;
    Mat shat = s / bc2;
    v -= lr * (mhat.array() / (shat.array().sqrt() + eps_)).matrix();
  }
}

void Adam::save(const std::string& path) const {
  ParamStore copy = state_;
  Mat t(1, 1);
  t(0, 0) = static_cast<double>(t_);
  copy.add("t", t);
  save_params(copy, path);
}

void Adam::load(const std::string& path) {
  state_ = ParamStore{};
  load_params(state_, path, /*extend=*/true);
  t_ = static_cast<long>(state_.values.at("t")(0, 0));
  state_.values.erase("t");
  state_.grads.erase("t");
}

double schedule_lr(double base, int warmup, long total_steps, long step) {
  if (warmup > 0 && step < warmup)
    return base * static_cast<double>(step + 1) / warmup;
  if (total_steps <= warmup) return base;
  double frac = static_cast<double>(total_steps - step) /
                static_cast<double>(total_steps - warmup);
  return base * std::max(0.0, frac);
}

void make_data(int n_train, unsigned seed, const std::string& out_dir) {
  if (n_train < 1) throw std::runtime_error("n must be >= 1");
  fs::create_directories(out_dir);
  int n_eval = std::max(8, n_train / 4);
  std::vector<SyntheticClipSpec> specs =
      generate_synthetic_corpus(n_train + n_eval, seed);

  auto records_for = [](const SyntheticClipSpec& s, const std::string& split) {
    std::vector<TemplateRecord> out;
    std::string ref = "synth:" + s.to_json();
    out.push_back({ref, "caption", "Generate audio caption:", s.caption,
                   split, TaskKind::captioning});
    out.push_back({ref, "sound_of", "This is a sound of", s.label, split,
                   TaskKind::classification});
    return out;
  };

  std::vector<TemplateRecord> train, eval;
  for (int i = 0; i < n_train; ++i)
    for (auto& r : records_for(specs[i], "train")) train.push_back(r);
  for (int i = n_train; i < n_train + n_eval; ++i)
    for (auto& r : records_for(specs[i], "eval")) eval.push_back(r);
  save_manifest(train, (fs::path(out_dir) / "train.jsonl").string());
  save_manifest(eval, (fs::path(out_dir) / "eval.jsonl").string());
}

AudioFeatureMap features_for_clip(const FrozenAudioEncoder& enc,
                                  const std::string& clip_ref) {
  auto [wave, sr] = resolve_clip(clip_ref);
  return enc.encode(wave, sr, clip_ref);
}

namespace {

struct DataBundle {
  std::vector<TemplateRecord> train_records;
  std::vector<std::string> corpus_strings;  // prompts + labels + outputs
};

DataBundle load_training_data(const RunConfig& cfg,
                              const TemplateTable& table) {
  DataBundle b;
  if (!cfg.data.train_manifest.empty()) {
    b.train_records = load_manifest(cfg.data.train_manifest, table);
  } else {
    std::vector<SyntheticClipSpec> specs =
        generate_synthetic_corpus(cfg.data.synth_n, cfg.data.synth_seed);
    for (const SyntheticClipSpec& s : specs) {
      std::string ref = "synth:" + s.to_json();
      b.train_records.push_back({ref, "caption", "Generate audio caption:",
                                 s.caption, "train", TaskKind::captioning});
      b.train_records.push_back({ref, "sound_of", "This is a sound of",
                                 s.label, "train", TaskKind::classification});
    }
  }
  for (const TemplateDef& t : table.all()) {
    b.corpus_strings.push_back(t.prompt);
    for (const std::string& l : t.labels) b.corpus_strings.push_back(l);
  }
  for (const TemplateRecord& r : b.train_records)
    b.corpus_strings.push_back(r.output_text);
  return b;
}

class FeatureCache {
 public:
  explicit FeatureCache(const FrozenAudioEncoder& enc) : enc_(enc) {}
  const AudioFeatureMap& get(const std::string& ref) {
    auto it = cache_.find(ref);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(ref, features_for_clip(enc_, ref)).first->second;
  }

 private:
  const FrozenAudioEncoder& enc_;
  std::map<std::string, AudioFeatureMap> cache_;
};

struct Meta {
  int stage = 1;
  int epochs_done = 0;
  long steps_done = 0;
  std::string audio_encoder_hash;
  std::string lm_hash;
};

void save_meta(const Meta& m, const std::string& path) {
  json j = {{"stage", m.stage},
            {"epochs_done", m.epochs_done},
            {"steps_done", m.steps_done},
            {"audio_encoder_hash", m.audio_encoder_hash},
            {"lm_hash", m.lm_hash}};
  std::ofstream f(path);
  f << j.dump(2) << "\n";
}

Meta load_meta(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  json j = json::parse(f);
  Meta m;
  m.stage = j.value("stage", 1);
  m.epochs_done = j.value("epochs_done", 0);
  m.steps_done = j.value("steps_done", 0L);
  m.audio_encoder_hash = j.value("audio_encoder_hash", "");
  m.lm_hash = j.value("lm_hash", "");
  return m;
}

void append_metrics_row(const std::string& path, bool write_header,
                        const std::vector<std::string>& header,
                        const std::vector<double>& row) {
  bool exists = fs::exists(path);
  std::ofstream f(path, std::ios::app);
  if (!exists && write_header) {
    for (size_t i = 0; i < header.size(); ++i)
      f << header[i] << (i + 1 < header.size() ? "," : "\n");
  }
  f << std::setprecision(12);
  for (size_t i = 0; i < row.size(); ++i)
    f << row[i] << (i + 1 < row.size() ? "," : "\n");
}

std::vector<double> read_metric_column(const std::string& path,
                                       const std::string& col) {
  std::ifstream f(path);
  std::vector<double> out;
  std::string line;
  int idx = -1;
  bool first = true;
  while (std::getline(f, line)) {
    std::stringstream ss(line);
    std::string cell;
    int i = 0;
    if (first) {
      while (std::getline(ss, cell, ','))
        if (cell == col) idx = i; else ++i;
      // idx counting above is wrong when match not last; redo cleanly
      first = false;
      std::stringstream ss2(line);
      idx = -1;
      i = 0;
      while (std::getline(ss2, cell, ',')) {
        if (cell == col) idx = i;
        ++i;
      }
      continue;
    }
    i = 0;
    while (std::getline(ss, cell, ',')) {
      if (i == idx) out.push_back(std::stod(cell));
      ++i;
    }
  }
  return out;
}

TokenSequence encode_caption_cls(const Vocabulary& v, const std::string& s,
                                 int max_len) {
  return encode(v, s, Special::CLS, false, max_len);
}

TokenSequence encode_caption_gen(const Vocabulary& v, const std::string& s,
                                 int max_len) {
  return encode(v, s, Special::DEC, true, max_len);
}

// Instruction/response sequences carry only their real tokens; masks and
// LM streams are built from valid positions.
TokenSequence encode_plain(const Vocabulary& v, const std::string& s) {
  TokenSequence out;
  for (const std::string& tok : split_lower(s)) {
    out.ids.push_back(v.id_of(tok));
    out.valid_mask.push_back(true);
  }
  return out;
}

// Global-norm gradient clipping; keeps high learning rates stable on the
// short desk schedules.
void clip_gradients(ParamStore& store, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : store.grads) sq += g.squaredNorm();
  double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return;
  double s = max_norm / norm;
  for (auto& [name, g] : store.grads) g *= s;
}

FrozenLMConfig lm_config_for(const RunConfig& cfg, int vocab_size) {
  FrozenLMConfig lc;
  lc.vocab_size = vocab_size;
  lc.lm_dim = cfg.lm.lm_dim;
  lc.lm_blocks = cfg.lm.lm_blocks;
  lc.lm_heads = cfg.lm.lm_heads;
  lc.ffn_dim = cfg.lm.ffn_dim;
  lc.max_positions = cfg.lm.max_positions;
  lc.seed = cfg.lm.seed;
  return lc;
}

// Language-model pretraining on the output corpus, then frozen.
std::unique_ptr<FrozenLM> pretrain_lm(const RunConfig& cfg,
                                      const Vocabulary& vocab,
                                      const std::vector<std::string>& texts) {
  auto lm = std::make_unique<FrozenLM>(lm_config_for(cfg, vocab.size()));
  Adam adam;
  std::mt19937_64 rng(cfg.lm.seed);
  int n = static_cast<int>(texts.size());
  for (int step = 0; step < cfg.lm.pretrain_steps; ++step) {
    Tape tape;
    std::vector<Var> losses;
    for (int b = 0; b < cfg.lm.pretrain_batch; ++b) {
      const std::string& text = texts[rng() % n];
      std::vector<int> ids;
      ids.push_back(static_cast<int>(Special::DEC));
      for (const std::string& tok : split_lower(text))
        ids.push_back(vocab.id_of(tok));
      ids.push_back(static_cast<int>(Special::EOS));
      std::vector<bool> valid(ids.size(), true);
      Var logits = lm->forward(tape, Var{}, ids, valid);
      long t = static_cast<long>(ids.size());
      std::vector<int> targets(t, 0);
      std::vector<bool> use(t, false);
      for (long k = 0; k + 1 < t; ++k) {
        targets[k] = ids[k + 1];
        use[k] = true;
      }
      losses.push_back(tape.cross_entropy_rows(logits, targets, use));
    }
    Var total = losses[0];
    for (size_t i = 1; i < losses.size(); ++i)
      total = tape.add(total, losses[i]);
    total = tape.scale(total, 1.0 / losses.size());
    lm->params().zero_grads();
    tape.backward(total);
    clip_gradients(lm->params(), 1.0);
    adam.step(lm->params(), cfg.lm.pretrain_lr);
  }
  lm->freeze();
  return lm;
}

}  // namespace

std::string train_stage1(const RunConfig& cfg_in, const std::string& out_dir,
                         bool resume) {
  RunConfig cfg = cfg_in;
  TemplateTable table = register_templates();
  fs::create_directories(out_dir);
  fs::path dir(out_dir);

  Meta meta;
  Vocabulary vocab;
  if (resume) {
    cfg = load_run_config((dir / "config.json").string());
    vocab = load_vocabulary((dir / "vocab.txt").string());
    meta = load_meta((dir / "meta.json").string());
  }

  DataBundle data = load_training_data(cfg, table);
  std::vector<TemplateRecord> caps;
  for (const TemplateRecord& r : data.train_records)
    if (r.task_kind == TaskKind::captioning && r.split == "train")
      caps.push_back(r);
  if (caps.empty())
    throw std::runtime_error("stage-1 requires captioning records");

  if (!resume) vocab = build_vocabulary(data.corpus_strings, cfg.vocab_max_size);
  cfg.model.vocab_size = vocab.size();
  cfg.model.seed = cfg.seed;
  cfg.validate();

  AudioEncoderConfig enc_cfg;
  enc_cfg.feat_dim = cfg.model.audio_feat_dim;
  FrozenAudioEncoder encoder(enc_cfg);
  std::string enc_hash = hash_params_hex(encoder.params());
  FeatureCache cache(encoder);

  BridgeNet net(cfg.model);
  Adam adam;
  if (resume) {
    load_params(net.params(), (dir / "bridge.ckpt").string());
    adam.load((dir / "optimizer.ckpt").string());
  }

  int n = static_cast<int>(caps.size());
  int per_epoch = (n + cfg.optimizer.batch_size - 1) / cfg.optimizer.batch_size;
  long total_steps =
      static_cast<long>(per_epoch) * cfg.optimizer.epochs_stage1;
  long step = meta.steps_done;
  std::string metrics_path = (dir / "metrics.csv").string();

  for (int epoch = meta.epochs_done; epoch < cfg.optimizer.epochs_stage1;
       ++epoch) {
    auto batches = make_batch_order(n, cfg.optimizer.batch_size, cfg.seed,
                                    epoch);
    for (const std::vector<int>& idxs : batches) {
      Stage1Batch batch;
      for (int i : idxs) {
        batch.audio.push_back(cache.get(caps[i].clip_ref));
        batch.captions_cls.push_back(encode_caption_cls(
            vocab, caps[i].output_text, cfg.model.max_text_len));
        batch.captions_gen.push_back(encode_caption_gen(
            vocab, caps[i].output_text, cfg.model.max_text_len));
      }
      Tape tape;
      Stage1StepResult res =
          stage1_losses(tape, net, batch, cfg.enabled_losses);
      net.params().zero_grads();
      tape.backward(res.total);
      if (cfg.optimizer.clip_norm > 0)
        clip_gradients(net.params(), cfg.optimizer.clip_norm);
      double lr = schedule_lr(cfg.optimizer.base_lr,
                              cfg.optimizer.warmup_steps, total_steps, step);
      adam.step(net.params(), lr);
      ++step;
      append_metrics_row(
          metrics_path, true,
          {"step", "alc", "alm", "atg", "total", "lr", "temperature"},
          {static_cast<double>(step), res.report.alc, res.report.alm,
           res.report.atg, res.report.total, lr,
           net.params().values.at("temperature")(0, 0)});
    }
    meta.epochs_done = epoch + 1;
  }

  meta.stage = 1;
  meta.steps_done = step;
  meta.audio_encoder_hash = enc_hash;
  save_run_config(cfg, (dir / "config.json").string());
  save_vocabulary(vocab, (dir / "vocab.txt").string());
  save_params(net.params(), (dir / "bridge.ckpt").string());
  adam.save((dir / "optimizer.ckpt").string());
  save_meta(meta, (dir / "meta.json").string());
  write_svg_line_plot((dir / "loss_curve.svg").string(), "stage-1 total loss",
                      read_metric_column(metrics_path, "total"));
  return out_dir;
}

std::string train_stage2(const RunConfig& cfg_in,
                         const std::string& stage1_ckpt,
                         const std::string& out_dir,
                         const std::string& lm_ckpt) {
  if (!fs::exists(fs::path(stage1_ckpt) / "bridge.ckpt"))
    throw std::runtime_error("missing stage-1 checkpoint: " + stage1_ckpt);
  RunConfig cfg = cfg_in;
  TemplateTable table = register_templates();
  fs::create_directories(out_dir);
  fs::path dir(out_dir);

  Vocabulary vocab =
      load_vocabulary((fs::path(stage1_ckpt) / "vocab.txt").string());
  cfg.model.vocab_size = vocab.size();
  cfg.model.seed = cfg.seed;
  cfg.validate();

  DataBundle data = load_training_data(cfg, table);
  std::vector<TemplateRecord> recs;
  for (const TemplateRecord& r : data.train_records)
    if (r.split == "train") recs.push_back(r);
  if (recs.empty()) throw std::runtime_error("no stage-2 records");

  AudioEncoderConfig enc_cfg;
  enc_cfg.feat_dim = cfg.model.audio_feat_dim;
  FrozenAudioEncoder encoder(enc_cfg);
  std::string enc_hash = hash_params_hex(encoder.params());
  FeatureCache cache(encoder);

  BridgeNet net(cfg.model);
  load_params(net.params(),
              (fs::path(stage1_ckpt) / "bridge.ckpt").string());

  // Frozen LM: load, or pretrain on the training outputs and freeze.
  std::unique_ptr<FrozenLM> lm;
  if (!lm_ckpt.empty()) {
    lm = std::make_unique<FrozenLM>(lm_config_for(cfg, vocab.size()));
    load_params(lm->params(), lm_ckpt);
    lm->freeze();
  } else {
    // Mirror an instruction-tuned LM: the frozen model must already know
    // that a prompt is followed by that task's response style.
    std::vector<std::string> texts;
    for (const TemplateRecord& r : recs) {
      texts.push_back(r.output_text);
      texts.push_back(r.input_prompt + " " + r.output_text);
    }
    lm = pretrain_lm(cfg, vocab, texts);
  }
  std::string lm_hash = hash_params_hex(lm->params());

  GenerativeStage gen(net, *lm, vocab);
  gen.init_projection(cfg.seed + 1);
  Adam adam;

  int n = static_cast<int>(recs.size());
  int bsz = cfg.optimizer.batch_size_stage2 > 0
                ? cfg.optimizer.batch_size_stage2
                : cfg.optimizer.batch_size;
  int per_epoch = (n + bsz - 1) / bsz;
  long total_steps = static_cast<long>(per_epoch) * cfg.optimizer.epochs_stage2;
  long step = 0;
  std::string metrics_path = (dir / "metrics.csv").string();
  if (fs::exists(metrics_path)) fs::remove(metrics_path);

  for (int epoch = 0; epoch < cfg.optimizer.epochs_stage2; ++epoch) {
    auto batches = make_batch_order(n, bsz, cfg.seed + 1, epoch);
    for (const std::vector<int>& idxs : batches) {
      Stage2Batch batch;
      for (int i : idxs) {
        batch.audio.push_back(cache.get(recs[i].clip_ref));
        batch.instructions.push_back(encode_plain(vocab, recs[i].input_prompt));
        batch.responses.push_back(encode_plain(vocab, recs[i].output_text));
        batch.template_ids.push_back(recs[i].template_id);
      }
      Tape tape;
      Var loss = gen.stage2_loss(tape, batch);
      double loss_v = loss.val()(0, 0);
      net.params().zero_grads();
      tape.backward(loss);
      if (cfg.optimizer.clip_norm > 0)
        clip_gradients(net.params(), cfg.optimizer.clip_norm);
      double lr = schedule_lr(cfg.optimizer.base_lr,
                              cfg.optimizer.warmup_steps, total_steps, step);
      adam.step(net.params(), lr);
      ++step;
      append_metrics_row(metrics_path, true, {"step", "stage2", "lr"},
                         {static_cast<double>(step), loss_v, lr});
    }
  }

  if (hash_params_hex(lm->params()) != lm_hash)
    throw std::runtime_error("frozen LM drifted during stage 2");
  FrozenAudioEncoder encoder_check(enc_cfg);
  if (hash_params_hex(encoder_check.params()) != enc_hash)
    throw std::runtime_error("frozen audio encoder drifted during stage 2");

  Meta meta;
  meta.stage = 2;
  meta.steps_done = step;
  meta.epochs_done = cfg.optimizer.epochs_stage2;
  meta.audio_encoder_hash = enc_hash;
  meta.lm_hash = lm_hash;
  save_run_config(cfg, (dir / "config.json").string());
  save_vocabulary(vocab, (dir / "vocab.txt").string());
  save_params(net.params(), (dir / "bridge.ckpt").string());
  save_params(lm->params(), (dir / "lm.ckpt").string());
  save_meta(meta, (dir / "meta.json").string());
  write_svg_line_plot((dir / "loss_curve.svg").string(), "stage-2 loss",
                      read_metric_column(metrics_path, "stage2"));
  return out_dir;
}

LoadedModel load_checkpoint(const std::string& ckpt_dir) {
  fs::path dir(ckpt_dir);
  if (!fs::exists(dir / "bridge.ckpt"))
    throw std::runtime_error("missing checkpoint: " + ckpt_dir);
  LoadedModel m;
  m.cfg = load_run_config((dir / "config.json").string());
  m.vocab = load_vocabulary((dir / "vocab.txt").string());
  m.cfg.model.vocab_size = m.vocab.size();
  m.cfg.model.seed = m.cfg.seed;

  AudioEncoderConfig enc_cfg;
  enc_cfg.feat_dim = m.cfg.model.audio_feat_dim;
  m.audio_encoder = std::make_unique<FrozenAudioEncoder>(enc_cfg);
  m.bridge = std::make_unique<BridgeNet>(m.cfg.model);
  load_params(m.bridge->params(), (dir / "bridge.ckpt").string(),
              /*extend=*/true);

  if (fs::exists(dir / "lm.ckpt")) {
    m.lm = std::make_unique<FrozenLM>(lm_config_for(m.cfg, m.vocab.size()));
    load_params(m.lm->params(), (dir / "lm.ckpt").string());
    m.lm->freeze();
    m.gen = std::make_unique<GenerativeStage>(*m.bridge, *m.lm, m.vocab);
    m.has_stage2 = true;
  }
  return m;
}

namespace {

void write_csv(const std::string& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream f(path);
  for (size_t i = 0; i < header.size(); ++i)
    f << header[i] << (i + 1 < header.size() ? "," : "\n");
  for (const auto& row : rows)
    for (size_t i = 0; i < row.size(); ++i)
      f << row[i] << (i + 1 < row.size() ? "," : "\n");
}

}  // namespace

std::string evaluate_suite(const std::string& ckpt_dir,
                           const std::string& suite,
                           const std::string& manifest,
                           const std::string& out_dir) {
  if (suite != "classify" && suite != "retrieve" && suite != "caption")
    throw std::runtime_error(
        "unknown suite: " + suite + " (valid: classify, retrieve, caption)");
  LoadedModel m = load_checkpoint(ckpt_dir);
  TemplateTable table = register_templates();
  std::vector<TemplateRecord> records = load_manifest(manifest, table);
  fs::create_directories(out_dir);
  fs::path dir(out_dir);
  json report;
  report["suite"] = suite;
  std::vector<std::vector<std::string>> csv_rows;

  if (suite == "classify") {
    std::map<std::string, std::vector<TemplateRecord>> groups;
    for (const TemplateRecord& r : records)
      if (r.task_kind == TaskKind::classification)
        groups[r.template_id].push_back(r);
    if (groups.empty()) throw std::runtime_error("no classification records");

    int correct = 0, total = 0;
    json per_template = json::object();
    std::vector<std::string> bar_labels;
    std::vector<double> bar_values;
    for (auto& [tid, recs] : groups) {
      std::vector<AudioFeatureMap> audio;
      for (const TemplateRecord& r : recs)
        audio.push_back(features_for_clip(*m.audio_encoder, r.clip_ref));
      ClassificationResult res =
          m.has_stage2
              ? classify_suite(recs, audio, *m.gen, table,
                               m.cfg.model.max_text_len)
              : classify_stage1_similarity(recs, audio, *m.bridge, m.vocab,
                                           table, m.cfg.model.max_text_len);
      per_template[tid] = res.accuracy;
      bar_labels.push_back(tid);
      bar_values.push_back(res.accuracy);
      for (size_t i = 0; i < recs.size(); ++i) {
        bool ok = res.predictions[i] == recs[i].output_text;
        correct += ok ? 1 : 0;
        ++total;
        csv_rows.push_back({tid, recs[i].output_text, res.predictions[i],
                            ok ? "1" : "0"});
      }
    }
    report["accuracy"] = 100.0 * correct / total;
    report["per_template"] = per_template;
    report["method"] = m.has_stage2 ? "vocab_rank" : "embedding_similarity";
    write_csv((dir / "classify.csv").string(),
              {"template", "truth", "prediction", "correct"}, csv_rows);
    write_svg_bar_plot((dir / "classify_accuracy.svg").string(),
                       "classification accuracy", bar_labels, bar_values);
  } else if (suite == "retrieve") {
    RetrievalCorpus corpus;
    std::vector<std::string> queries, relevant;
    std::set<std::string> seen;
    for (const TemplateRecord& r : records) {
      if (r.task_kind != TaskKind::captioning) continue;
      if (seen.insert(r.clip_ref).second) {
        corpus.clips.push_back(features_for_clip(*m.audio_encoder, r.clip_ref));
        corpus.clip_ids.push_back(r.clip_ref);
      }
      queries.push_back(r.output_text);
      relevant.push_back(r.clip_ref);
    }
    if (queries.empty()) throw std::runtime_error("no captioning records");
    RetrievalResult res =
        retrieval_eval(*m.bridge, m.vocab, corpus, queries, relevant,
                       std::nullopt, m.cfg.model.max_text_len);
    report["r_at_1"] = res.r_at[1];
    report["r_at_5"] = res.r_at[5];
    report["r_at_10"] = res.r_at[10];
    for (size_t i = 0; i < queries.size(); ++i)
      csv_rows.push_back({queries[i], std::to_string(res.ranks[i])});
    write_csv((dir / "retrieve.csv").string(), {"query", "rank"}, csv_rows);
    write_svg_bar_plot((dir / "r_at_k.svg").string(), "text-to-audio recall",
                       {"R@1", "R@5", "R@10"},
                       {res.r_at[1], res.r_at[5], res.r_at[10]});
  } else {  // caption
    if (!m.has_stage2)
      throw std::runtime_error("caption suite requires a stage-2 checkpoint");
    double p = 0, r = 0, f1 = 0;
    int n = 0;
    for (const TemplateRecord& rec : records) {
      if (rec.task_kind != TaskKind::captioning) continue;
      AudioFeatureMap audio =
          features_for_clip(*m.audio_encoder, rec.clip_ref);
      std::string hyp = m.gen->answer(audio, rec.input_prompt, 24);
      RougeScore s = rouge_l(hyp, rec.output_text);
      p += s.precision;
      r += s.recall;
      f1 += s.f1;
      ++n;
      csv_rows.push_back({rec.output_text, hyp, std::to_string(s.f1)});
    }
    if (n == 0) throw std::runtime_error("no captioning records");
    report["rouge_l_precision"] = p / n;
    report["rouge_l_recall"] = r / n;
    report["rouge_l_f1"] = f1 / n;
    write_csv((dir / "caption.csv").string(),
              {"reference", "hypothesis", "rouge_l_f1"}, csv_rows);
    write_svg_bar_plot((dir / "rouge.svg").string(), "caption quality",
                       {"P", "R", "F1"}, {p / n, r / n, f1 / n});
  }

  std::string text = report.dump(2);
  std::ofstream f((dir / "report.json").string());
  f << text << "\n";
  return text;
}

std::vector<LossFlags> paper_ablation_grid() {
  LossFlags alc{true, false, false};
  LossFlags alc_atg{true, false, true};
  LossFlags alc_alm{true, true, false};
  LossFlags full{true, true, true};
  return {alc, alc_atg, alc_alm, full};
}

namespace {
std::string flags_name(const LossFlags& f) {
  std::string s;
  if (f.alc) s += "ALC";
  if (f.alm) s += s.empty() ? "ALM" : "+ALM";
  if (f.atg) s += s.empty() ? "ATG" : "+ATG";
  return s;
}
}  // namespace

std::vector<AblationRow> run_ablation(const RunConfig& cfg,
                                      const std::vector<LossFlags>& grid,
                                      const std::string& manifest,
                                      const std::string& out_dir) {
  if (grid.empty()) throw std::runtime_error("empty ablation grid");
  fs::create_directories(out_dir);
  std::vector<AblationRow> rows;
  for (size_t g = 0; g < grid.size(); ++g) {
    if (!grid[g].alc)
      std::cerr << "warning: ablation row without ALC\n";
    RunConfig row_cfg = cfg;
    row_cfg.enabled_losses = grid[g];
    std::string name = flags_name(grid[g]);
    fs::path row_dir = fs::path(out_dir) / ("row_" + std::to_string(g));
    std::string s1 = train_stage1(row_cfg, (row_dir / "stage1").string());
    std::string s2 =
        train_stage2(row_cfg, s1, (row_dir / "stage2").string());
    std::string rep = evaluate_suite(s2, "classify", manifest,
                                     (row_dir / "eval").string());
    double acc = json::parse(rep).at("accuracy").get<double>();
    rows.push_back({name, grid[g], acc});
  }

  std::ofstream md(fs::path(out_dir) / "ablation.md");
  md << ablation_table_markdown(rows);
  std::vector<std::vector<std::string>> csv_rows;
  for (const AblationRow& r : rows)
    csv_rows.push_back({r.name, std::to_string(r.accuracy)});
  write_csv((fs::path(out_dir) / "ablation.csv").string(),
            {"losses", "accuracy"}, csv_rows);
  return rows;
}

std::string ablation_table_markdown(const std::vector<AblationRow>& rows) {
  std::ostringstream ss;
  ss << "| Method | Accuracy |\n|---|---|\n";
  ss << std::fixed << std::setprecision(2);
  for (const AblationRow& r : rows)
    ss << "| " << r.name << " | " << r.accuracy << " |\n";
  return ss.str();
}

std::string answer_from_checkpoint(const std::string& ckpt_dir,
                                   const std::string& clip_ref,
                                   const std::string& instruction,
                                   int max_new) {
  LoadedModel m = load_checkpoint(ckpt_dir);
  if (!m.has_stage2)
    throw std::runtime_error("answer requires a stage-2 checkpoint");
  AudioFeatureMap audio = features_for_clip(*m.audio_encoder, clip_ref);
  return m.gen->answer(audio, instruction, max_new);
}

void write_svg_line_plot(const std::string& path, const std::string& title,
                         const std::vector<double>& ys) {
  const int W = 640, H = 360, pad = 40;
  std::ofstream f(path);
  f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='"
    << H << "'>\n<rect width='100%' height='100%' fill='white'/>\n"
    << "<text x='" << pad << "' y='20' font-size='14'>" << title
    << "</text>\n";
  if (ys.size() >= 2) {
    double lo = ys[0], hi = ys[0];
    for (double y : ys) {
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
    if (hi - lo < 1e-12) hi = lo + 1.0;
    f << "<polyline fill='none' stroke='steelblue' stroke-width='1.5' points='";
    for (size_t i = 0; i < ys.size(); ++i) {
      double x = pad + (W - 2.0 * pad) * i / (ys.size() - 1);
      double y = H - pad - (H - 2.0 * pad) * (ys[i] - lo) / (hi - lo);
      f << x << "," << y << " ";
    }
    f << "'/>\n";
  }
  f << "</svg>\n";
}

void write_svg_bar_plot(const std::string& path, const std::string& title,
                        const std::vector<std::string>& labels,
                        const std::vector<double>& values) {
  const int W = 640, H = 360, pad = 40;
  std::ofstream f(path);
  f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='"
    << H << "'>\n<rect width='100%' height='100%' fill='white'/>\n"
    << "<text x='" << pad << "' y='20' font-size='14'>" << title
    << "</text>\n";
  if (!values.empty()) {
    double hi = 1e-9;
    for (double v : values) hi = std::max(hi, v);
    double bw = (W - 2.0 * pad) / values.size();
    for (size_t i = 0; i < values.size(); ++i) {
      double h = (H - 2.0 * pad) * values[i] / hi;
      f << "<rect x='" << pad + i * bw + 4 << "' y='" << H - pad - h
        << "' width='" << bw - 8 << "' height='" << h
        << "' fill='steelblue'/>\n";
      f << "<text x='" << pad + i * bw + bw / 2 << "' y='" << H - pad + 16
        << "' font-size='12' text-anchor='middle'>" << labels[i]
        << "</text>\n";
    }
  }
  f << "</svg>\n";
}

}  // namespace mint
