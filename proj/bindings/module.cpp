#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mint/data.hpp"
#include "mint/evaluation.hpp"
#include "mint/masking.hpp"
#include "mint/pipeline.hpp"
#include "mint/tokenizer.hpp"

namespace py = pybind11;

PYBIND11_MODULE(_mint, m) {
  m.doc() = "bridge-network audio-language pipeline bindings";

  m.def("default_config_json",
        [] { return mint::run_config_to_json(mint::RunConfig{}); });
  m.def("make_data", &mint::make_data, py::arg("n_train"), py::arg("seed"),
        py::arg("out_dir"));
  m.def(
      "train_stage1",
      [](const std::string& config_json, const std::string& out_dir,
         bool resume) {
        return mint::train_stage1(mint::run_config_from_json(config_json),
                                  out_dir, resume);
      },
      py::arg("config_json"), py::arg("out_dir"), py::arg("resume") = false);
  m.def(
      "train_stage2",
      [](const std::string& config_json, const std::string& stage1_ckpt,
         const std::string& out_dir, const std::string& lm_ckpt) {
        return mint::train_stage2(mint::run_config_from_json(config_json),
                                  stage1_ckpt, out_dir, lm_ckpt);
      },
      py::arg("config_json"), py::arg("stage1_ckpt"), py::arg("out_dir"),
      py::arg("lm_ckpt") = "");
  m.def("evaluate", &mint::evaluate_suite, py::arg("ckpt_dir"),
        py::arg("suite"), py::arg("manifest"), py::arg("out_dir"));
  m.def("answer", &mint::answer_from_checkpoint, py::arg("ckpt_dir"),
        py::arg("clip_ref"), py::arg("instruction"), py::arg("max_new") = 24);

  m.def("rouge_l", [](const std::string& cand, const std::string& ref) {
    mint::RougeScore s = mint::rouge_l(cand, ref);
    return py::make_tuple(s.precision, s.recall, s.f1);
  });
  m.def("split_lower", &mint::split_lower);
  m.def(
      "encode_ids",
      [](const std::vector<std::string>& corpus, int max_size,
         const std::string& text, int max_len) {
        mint::Vocabulary v = mint::build_vocabulary(corpus, max_size);
        return mint::encode(v, text, std::nullopt, false, max_len).ids;
      },
      py::arg("corpus"), py::arg("max_size"), py::arg("text"),
      py::arg("max_len"));
  m.def("mask_grid", [](const std::string& kind, int q_len,
                        const std::vector<bool>& text_valid) {
    mint::AttentionMaskPlan p =
        kind == "unimodal" ? mint::build_unimodal_mask(q_len, text_valid)
        : kind == "bidirectional"
            ? mint::build_bidirectional_mask(q_len, text_valid)
            : mint::build_causal_multimodal_mask(q_len, text_valid);
    return p.to_grid();
  });
  m.def("render_clip_json",
        [](const std::string& spec_json, int sample_rate) {
          return mint::render_clip(
              mint::SyntheticClipSpec::from_json(spec_json), sample_rate);
        });
  m.def("synthetic_corpus_json", [](int n, unsigned seed) {
    std::vector<std::string> out;
    for (const auto& s : mint::generate_synthetic_corpus(n, seed))
      out.push_back(s.to_json());
    return out;
  });
}
