// Instruction templates, synthetic clip generation, manifests and
// deterministic batching.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "mint/frozen.hpp"
#include "mint/tokenizer.hpp"

namespace mint {

enum class TaskKind { classification, captioning };

struct TemplateDef {
  std::string id;
  std::string prompt;
  TaskKind kind = TaskKind::captioning;
  std::vector<std::string> labels;  // closed label set; empty for captioning
};

class TemplateTable {
 public:
  void add(TemplateDef def);
  const TemplateDef& get(const std::string& id) const;
  bool has(const std::string& id) const { return by_id_.count(id) > 0; }
  const std::vector<TemplateDef>& all() const { return defs_; }

 private:
  std::vector<TemplateDef> defs_;
  std::map<std::string, size_t> by_id_;
};

// Built-in table mirroring the instruction-template scheme; prompts are
// pinned strings.
TemplateTable register_templates();

enum class PrimitiveKind { tone, chirp, noise_burst, click_train };

struct ClipComponent {
  PrimitiveKind kind;
  double freq_hz = 440.0;   // tone/chirp base frequency
  double rate_hz = 8.0;     // click train rate
  double onset_s = 0.0;
  double duration_s = 1.0;
  unsigned noise_seed = 0;  // noise bursts are seeded per component
  std::string descriptor;   // pitch/rate/texture word used in the caption
};

struct SyntheticClipSpec {
  std::vector<ClipComponent> components;
  std::string label;
  std::string caption;

  std::string to_json() const;
  static SyntheticClipSpec from_json(const std::string& json_text);
};

// Deterministic corpus with unique captions; label set has >= 6 classes.
std::vector<SyntheticClipSpec> generate_synthetic_corpus(int n, unsigned seed);

// All class labels the synthetic generator can emit.
std::vector<std::string> synthetic_label_set();

std::vector<double> render_clip(const SyntheticClipSpec& spec, int sample_rate);

struct TemplateRecord {
  std::string clip_ref;  // WAV path or "synth:{...json...}"
  std::string template_id;
  std::string input_prompt;
  std::string output_text;
  std::string split;  // "train" or "eval"
  TaskKind task_kind = TaskKind::captioning;
};

std::vector<TemplateRecord> load_manifest(const std::string& path,
                                          const TemplateTable& table);
void save_manifest(const std::vector<TemplateRecord>& records,
                   const std::string& path);

// Deterministic per-(seed, epoch) shuffled batch index plan; the final
// short batch is kept.
std::vector<std::vector<int>> make_batch_order(int n, int batch_size,
                                               unsigned seed, int epoch);

// Mono 16-bit PCM WAV.
void write_wav(const std::string& path, const std::vector<double>& samples,
               int sample_rate);
std::pair<std::vector<double>, int> read_wav(const std::string& path);

// Resolves a clip_ref (WAV path or synth spec) to a waveform at 16 kHz.
std::pair<std::vector<double>, int> resolve_clip(const std::string& clip_ref);

}  // namespace mint
