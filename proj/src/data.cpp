#include "mint/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace mint {

using nlohmann::json;

void TemplateTable::add(TemplateDef def) {
  if (by_id_.count(def.id))
    throw std::runtime_error("duplicate template_id: " + def.id);
  by_id_[def.id] = defs_.size();
  defs_.push_back(std::move(def));
}

const TemplateDef& TemplateTable::get(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw std::runtime_error("unknown template: " + id);
  return defs_[it->second];
}

TemplateTable register_templates() {
  TemplateTable t;
  t.add({"sound_of", "This is a sound of", TaskKind::classification,
         synthetic_label_set()});
  t.add({"instruments", "Identify the instruments in this segment of music:",
         TaskKind::classification,
         {"drums", "flute", "guitar", "piano", "violin"}});
  t.add({"genre", "The genre of this music is", TaskKind::classification,
         {"blues", "classical", "electronic", "folk", "jazz", "rock"}});
  t.add({"prominent_instrument",
         "The most prominent instrument in this music is",
         TaskKind::classification,
         {"brass", "flute", "guitar", "keyboard", "mallet", "organ", "reed",
          "string", "synth", "vocal"}});
  t.add({"music_key", "The key of this music is", TaskKind::classification,
         {"a major", "a minor", "c major", "c minor", "e major", "e minor",
          "g major", "g minor"}});
  t.add({"caption", "Generate audio caption:", TaskKind::captioning, {}});
  return t;
}

namespace {

struct KindInfo {
  PrimitiveKind kind;
  const char* word;
  std::vector<std::pair<const char*, double>> descriptors;  // word -> param
};

const std::vector<KindInfo>& kind_infos() {
  static const std::vector<KindInfo> infos = {
      {PrimitiveKind::tone,
       "tone",
       {{"deep", 110}, {"low", 220}, {"mid", 440}, {"high", 880}, {"shrill", 1760}}},
      {PrimitiveKind::chirp,
       "chirp",
       {{"deep", 110}, {"low", 220}, {"mid", 440}, {"high", 880}, {"shrill", 1760}}},
      {PrimitiveKind::noise_burst,
       "noise",
       {{"soft", 0}, {"harsh", 1}, {"hissing", 2}, {"rumbling", 3}, {"crackling", 4}}},
      {PrimitiveKind::click_train,
       "click",
       {{"slow", 2}, {"steady", 4}, {"regular", 8}, {"rapid", 12}, {"frantic", 16}}},
  };
  return infos;
}

const KindInfo& info_for(PrimitiveKind k) {
  for (const KindInfo& i : kind_infos())
    if (i.kind == k) return i;
  throw std::runtime_error("invalid primitive");
}

// Class combinations, round-robin over corpus generation.
const std::vector<std::vector<PrimitiveKind>>& class_combos() {
  static const std::vector<std::vector<PrimitiveKind>> combos = {
      {PrimitiveKind::tone},
      {PrimitiveKind::chirp},
      {PrimitiveKind::noise_burst},
      {PrimitiveKind::click_train},
      {PrimitiveKind::tone, PrimitiveKind::noise_burst},
      {PrimitiveKind::chirp, PrimitiveKind::click_train},
      {PrimitiveKind::tone, PrimitiveKind::click_train},
      {PrimitiveKind::chirp, PrimitiveKind::noise_burst},
  };
  return combos;
}

std::string kind_name(PrimitiveKind k) { return info_for(k).word; }

PrimitiveKind kind_from_name(const std::string& s) {
  for (const KindInfo& i : kind_infos())
    if (s == i.word) return i.kind;
  throw std::runtime_error("invalid primitive: " + s);
}

}  // namespace

std::vector<std::string> synthetic_label_set() {
  std::vector<std::string> out;
  for (const auto& combo : class_combos()) {
    std::string label;
    for (const PrimitiveKind k : combo) {
      if (!label.empty()) label += " plus ";
      label += kind_name(k);
    }
    out.push_back(label);
  }
  return out;
}

std::string SyntheticClipSpec::to_json() const {
  json j;
  j["label"] = label;
  j["caption"] = caption;
  j["components"] = json::array();
  for (const ClipComponent& c : components) {
    json jc;
    jc["kind"] = kind_name(c.kind);
    jc["freq_hz"] = c.freq_hz;
    jc["rate_hz"] = c.rate_hz;
    jc["onset_s"] = c.onset_s;
    jc["duration_s"] = c.duration_s;
    jc["noise_seed"] = c.noise_seed;
    jc["descriptor"] = c.descriptor;
    j["components"].push_back(jc);
  }
  return j.dump();
}

SyntheticClipSpec SyntheticClipSpec::from_json(const std::string& text) {
  json j = json::parse(text);
  SyntheticClipSpec s;
  s.label = j.at("label").get<std::string>();
  s.caption = j.at("caption").get<std::string>();
  for (const json& jc : j.at("components")) {
    ClipComponent c;
    c.kind = kind_from_name(jc.at("kind").get<std::string>());
    c.freq_hz = jc.at("freq_hz").get<double>();
    c.rate_hz = jc.at("rate_hz").get<double>();
    c.onset_s = jc.at("onset_s").get<double>();
    c.duration_s = jc.at("duration_s").get<double>();
    c.noise_seed = jc.at("noise_seed").get<unsigned>();
    c.descriptor = jc.at("descriptor").get<std::string>();
    s.components.push_back(c);
  }
  return s;
}

std::vector<SyntheticClipSpec> generate_synthetic_corpus(int n, unsigned seed) {
  if (n < 1) throw std::runtime_error("corpus size must be >= 1");
  std::mt19937_64 rng(seed);
  std::set<std::string> seen_captions;
  std::vector<SyntheticClipSpec> out;

  const auto& combos = class_combos();
  for (int i = 0; i < n; ++i) {
    const auto& combo = combos[i % combos.size()];
    SyntheticClipSpec spec;
    bool ok = false;
    for (int attempt = 0; attempt < 500 && !ok; ++attempt) {
      spec = SyntheticClipSpec{};
      std::string caption;
      double onset = 0.0;
      for (const PrimitiveKind k : combo) {
        const KindInfo& info = info_for(k);
        const auto& desc =
            info.descriptors[rng() % info.descriptors.size()];
        bool long_form = (rng() % 2) == 1;
        ClipComponent c;
        c.kind = k;
        c.descriptor = desc.first;
        c.duration_s = long_form ? 1.4 : 0.6;
        c.onset_s = onset;
        onset += 0.2;
        if (k == PrimitiveKind::tone || k == PrimitiveKind::chirp)
          c.freq_hz = desc.second;
        else if (k == PrimitiveKind::click_train)
          c.rate_hz = desc.second;
        else
          // Mode lives in noise_seed % 5; the upper part varies the draw.
          c.noise_seed = static_cast<unsigned>(desc.second) +
                         5u * static_cast<unsigned>(rng() % 1000);
        if (!caption.empty()) caption += " plus ";
        caption += std::string("a ") + (long_form ? "long " : "short ") +
                   desc.first + " " + info.word;
        spec.components.push_back(c);
      }
      spec.caption = caption;
      ok = seen_captions.insert(caption).second;
    }
    if (!ok) throw std::runtime_error("could not draw a unique caption");
    std::string label;
    for (const PrimitiveKind k : combo) {
      if (!label.empty()) label += " plus ";
      label += kind_name(k);
    }
    spec.label = label;
    out.push_back(std::move(spec));
  }
  return out;
}

std::vector<double> render_clip(const SyntheticClipSpec& spec,
                                int sample_rate) {
  if (sample_rate != 8000 && sample_rate != 16000)
    throw std::runtime_error("unsupported sample rate");
  if (spec.components.empty()) throw std::runtime_error("empty spec");

  double total = 0.0;
  for (const ClipComponent& c : spec.components)
    total = std::max(total, c.onset_s + c.duration_s);
  if (total > 30.0) throw std::runtime_error("clip too long");
  size_t n = static_cast<size_t>(std::ceil(total * sample_rate));
  std::vector<double> out(n, 0.0);

  for (const ClipComponent& c : spec.components) {
    size_t start = static_cast<size_t>(c.onset_s * sample_rate);
    size_t len = static_cast<size_t>(c.duration_s * sample_rate);
    switch (c.kind) {
      case PrimitiveKind::tone: {
        for (size_t i = 0; i < len && start + i < n; ++i)
          out[start + i] +=
              std::sin(2.0 * M_PI * c.freq_hz * i / sample_rate);
        break;
      }
      case PrimitiveKind::chirp: {
        // Linear sweep from f to 2f over the component duration.
        double slope = c.freq_hz / c.duration_s;
        for (size_t i = 0; i < len && start + i < n; ++i) {
          double t = static_cast<double>(i) / sample_rate;
          double phase = 2.0 * M_PI * (c.freq_hz * t + 0.5 * slope * t * t);
          out[start + i] += std::sin(phase);
        }
        break;
      }
      case PrimitiveKind::noise_burst: {
        std::mt19937 nrng(c.noise_seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        int mode = static_cast<int>(c.noise_seed % 5);
        double prev = 0.0, state = 0.0;
        for (size_t i = 0; i < len && start + i < n; ++i) {
          double x = u(nrng);
          double y;
          switch (mode) {
            case 0: y = 0.4 * x; break;                         // soft
            case 1: y = x; break;                               // harsh
            case 2: y = x - prev; break;                        // hissing
            case 3: state = 0.95 * state + 0.05 * x; y = 8.0 * state; break;
            default: y = (u(nrng) > 0.96) ? x * 4.0 : 0.0; break;  // crackling
          }
          prev = x;
          out[start + i] += y;
        }
        break;
      }
      case PrimitiveKind::click_train: {
        size_t period = static_cast<size_t>(sample_rate / c.rate_hz);
        double decay = std::exp(-1.0 / (0.004 * sample_rate));
        double env = 0.0;
        for (size_t i = 0; i < len && start + i < n; ++i) {
          if (period > 0 && i % period == 0) env = 1.0;
          out[start + i] += env;
          env *= decay;
        }
        break;
      }
    }
  }

  double peak = 0.0;
  for (double s : out) peak = std::max(peak, std::abs(s));
  if (peak > 0.0)
    for (double& s : out) s *= 0.9 / peak;
  return out;
}

std::vector<TemplateRecord> load_manifest(const std::string& path,
                                          const TemplateTable& table) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read manifest: " + path);
  std::vector<TemplateRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw std::runtime_error("malformed line " + std::to_string(line_no));
    }
    if (!j.contains("clip") || !j.contains("template_id") ||
        !j.contains("output") || !j.contains("split"))
      throw std::runtime_error("malformed line " + std::to_string(line_no));
    std::string tid = j["template_id"].get<std::string>();
    if (!table.has(tid))
      throw std::runtime_error("unknown template: " + tid + " (line " +
                               std::to_string(line_no) + ")");
    const TemplateDef& def = table.get(tid);
    TemplateRecord r;
    r.clip_ref = j["clip"].get<std::string>();
    r.template_id = tid;
    r.input_prompt = def.prompt;
    r.output_text = j["output"].get<std::string>();
    r.split = j["split"].get<std::string>();
    r.task_kind = def.kind;
    if (r.split != "train" && r.split != "eval")
      throw std::runtime_error("bad split (line " + std::to_string(line_no) +
                               ")");
    if (def.kind == TaskKind::classification &&
        std::find(def.labels.begin(), def.labels.end(), r.output_text) ==
            def.labels.end())
      throw std::runtime_error("label not in template set (line " +
                               std::to_string(line_no) + ")");
    out.push_back(std::move(r));
  }
  return out;
}

void save_manifest(const std::vector<TemplateRecord>& records,
                   const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write manifest: " + path);
  for (const TemplateRecord& r : records) {
    json j;
    j["clip"] = r.clip_ref;
    j["template_id"] = r.template_id;
    j["output"] = r.output_text;
    j["split"] = r.split;
    f << j.dump() << "\n";
  }
}

std::vector<std::vector<int>> make_batch_order(int n, int batch_size,
                                               unsigned seed, int epoch) {
  if (n < 1) throw std::runtime_error("no records");
  if (batch_size < 1) throw std::runtime_error("batch_size must be >= 1");
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed * 1000003ULL + static_cast<unsigned>(epoch));
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<int>> batches;
  for (int i = 0; i < n; i += batch_size) {
    std::vector<int> b(idx.begin() + i,
                       idx.begin() + std::min(n, i + batch_size));
    batches.push_back(std::move(b));
  }
  return batches;
}

namespace {
void put_u32(std::ofstream& f, uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), 4);
}
void put_u16(std::ofstream& f, uint16_t v) {
  f.write(reinterpret_cast<const char*>(&v), 2);
}
}  // namespace

void write_wav(const std::string& path, const std::vector<double>& samples,
               int sample_rate) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  uint32_t data_bytes = static_cast<uint32_t>(samples.size() * 2);
  f.write("RIFF", 4);
  put_u32(f, 36 + data_bytes);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  put_u32(f, 16);
  put_u16(f, 1);  // PCM
  put_u16(f, 1);  // mono
  put_u32(f, static_cast<uint32_t>(sample_rate));
  put_u32(f, static_cast<uint32_t>(sample_rate * 2));
  put_u16(f, 2);
  put_u16(f, 16);
  f.write("data", 4);
  put_u32(f, data_bytes);
  for (double s : samples) {
    double c = std::clamp(s, -1.0, 1.0);
    int16_t v = static_cast<int16_t>(std::lround(c * 32767.0));
    f.write(reinterpret_cast<const char*>(&v), 2);
  }
}

std::pair<std::vector<double>, int> read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  char tag[5] = {0};
  f.read(tag, 4);
  if (std::string(tag) != "RIFF") throw std::runtime_error("not a WAV file");
  f.ignore(4);
  f.read(tag, 4);
  if (std::string(tag) != "WAVE") throw std::runtime_error("not a WAV file");

  int sample_rate = 0;
  uint16_t channels = 0, bits = 0;
  std::vector<double> samples;
  while (f.read(tag, 4)) {
    uint32_t size = 0;
    f.read(reinterpret_cast<char*>(&size), 4);
    std::string chunk(tag);
    if (chunk == "fmt ") {
      uint16_t fmt;
      uint32_t sr, br;
      uint16_t align;
      f.read(reinterpret_cast<char*>(&fmt), 2);
      f.read(reinterpret_cast<char*>(&channels), 2);
      f.read(reinterpret_cast<char*>(&sr), 4);
      f.read(reinterpret_cast<char*>(&br), 4);
      f.read(reinterpret_cast<char*>(&align), 2);
      f.read(reinterpret_cast<char*>(&bits), 2);
      if (fmt != 1 || bits != 16)
        throw std::runtime_error("only 16-bit PCM WAV supported");
      sample_rate = static_cast<int>(sr);
      if (size > 16) f.ignore(size - 16);
    } else if (chunk == "data") {
      size_t n = size / 2;
      samples.resize(n / std::max<uint16_t>(channels, 1));
      for (size_t i = 0; i < samples.size(); ++i) {
        double acc = 0.0;
        for (uint16_t c = 0; c < channels; ++c) {
          int16_t v;
          f.read(reinterpret_cast<char*>(&v), 2);
          acc += v / 32768.0;
        }
        samples[i] = acc / channels;
      }
      break;
    } else {
      f.ignore(size);
    }
  }
  if (sample_rate == 0 || samples.empty())
    throw std::runtime_error("invalid WAV: " + path);
  return {samples, sample_rate};
}

std::pair<std::vector<double>, int> resolve_clip(const std::string& clip_ref) {
  const std::string prefix = "synth:";
  if (clip_ref.rfind(prefix, 0) == 0) {
    SyntheticClipSpec spec =
        SyntheticClipSpec::from_json(clip_ref.substr(prefix.size()));
    return {render_clip(spec, 16000), 16000};
  }
  return read_wav(clip_ref);
}

}  // namespace mint
