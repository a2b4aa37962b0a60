// Two-stage training orchestration: configs, Adam, schedules,
// checkpoint directories, metrics, evaluation dispatch and plots.

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mint/bridge_net.hpp"
#include "mint/data.hpp"
#include "mint/evaluation.hpp"
#include "mint/generative.hpp"
#include "mint/objectives.hpp"

namespace mint {

struct OptimizerConfig {
  double base_lr = 1e-4;
  double clip_norm = 1.0;  // global gradient-norm clip; <= 0 disables
  int warmup_steps = 50;
  int batch_size = 8;
  int batch_size_stage2 = 0;  // 0 = same as batch_size
  int epochs_stage1 = 5;
  int epochs_stage2 = 3;
};

struct LMTrainConfig {
  int lm_dim = 64;
  int lm_blocks = 2;
  int lm_heads = 4;
  int ffn_dim = 128;
  int max_positions = 96;
  int pretrain_steps = 400;
  double pretrain_lr = 3e-3;
  int pretrain_batch = 8;
  unsigned seed = 99;
};

struct DataConfig {
  std::string train_manifest;
  std::string eval_manifest;
  int synth_n = 0;       // used when train_manifest is empty
  unsigned synth_seed = 7;
};

struct RunConfig {
  BridgeNetConfig model;
  LMTrainConfig lm;
  OptimizerConfig optimizer;
  LossFlags enabled_losses;
  DataConfig data;
  unsigned seed = 7;
  int vocab_max_size = 256;

  void validate() const;
};

RunConfig run_config_from_json(const std::string& json_text);
std::string run_config_to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& cfg, const std::string& path);

// Adam with the standard defaults; lr is supplied per step.
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(ParamStore& store, double lr);
  void save(const std::string& path) const;
  void load(const std::string& path);
  long steps_done() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  long t_ = 0;
  ParamStore state_;  // "m.{name}" and "v.{name}"
};

// Linear warmup, then linear decay to zero at total_steps.
double schedule_lr(double base, int warmup, long total_steps, long step);

// Data generation: writes train.jsonl / eval.jsonl (caption + sound_of
// records per clip) under out_dir.
void make_data(int n_train, unsigned seed, const std::string& out_dir);

std::string train_stage1(const RunConfig& cfg, const std::string& out_dir,
                         bool resume = false);
std::string train_stage2(const RunConfig& cfg, const std::string& stage1_ckpt,
                         const std::string& out_dir,
                         const std::string& lm_ckpt = "");

// Loaded checkpoint bundle.
struct LoadedModel {
  RunConfig cfg;
  Vocabulary vocab;
  std::unique_ptr<FrozenAudioEncoder> audio_encoder;
  std::unique_ptr<BridgeNet> bridge;
  std::unique_ptr<FrozenLM> lm;  // stage-2 checkpoints only
  std::unique_ptr<GenerativeStage> gen;
  bool has_stage2 = false;
};

LoadedModel load_checkpoint(const std::string& ckpt_dir);

// suite: "classify", "retrieve" or "caption". Writes report.json,
// per-example CSV and plots under out_dir; returns the report JSON text.
std::string evaluate_suite(const std::string& ckpt_dir,
                           const std::string& suite,
                           const std::string& manifest,
                           const std::string& out_dir);

struct AblationRow {
  std::string name;
  LossFlags flags;
  double accuracy = 0.0;
};

// Trains stage 1 + stage 2 per flag set and evaluates classification.
std::vector<AblationRow> run_ablation(const RunConfig& cfg,
                                      const std::vector<LossFlags>& grid,
                                      const std::string& manifest,
                                      const std::string& out_dir);
std::vector<LossFlags> paper_ablation_grid();
std::string ablation_table_markdown(const std::vector<AblationRow>& rows);

std::string answer_from_checkpoint(const std::string& ckpt_dir,
                                   const std::string& clip_ref,
                                   const std::string& instruction,
                                   int max_new);

// Minimal SVG emitters for metrics plots.
void write_svg_line_plot(const std::string& path, const std::string& title,
                         const std::vector<double>& ys);
void write_svg_bar_plot(const std::string& path, const std::string& title,
                        const std::vector<std::string>& labels,
                        const std::vector<double>& values);

// Rendering + feature cache shared by training and evaluation.
AudioFeatureMap features_for_clip(const FrozenAudioEncoder& enc,
                                  const std::string& clip_ref);

}  // namespace mint
