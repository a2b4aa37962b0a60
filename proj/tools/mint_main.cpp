// mint: two-stage audio-language training pipeline CLI.

#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mint/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mint: bridge-network audio-language training pipeline"};
  app.require_subcommand(1);

  // make-data
  auto* mk = app.add_subcommand("make-data", "generate a synthetic corpus");
  int mk_n = 64;
  unsigned mk_seed = 7;
  std::string mk_out = "corpus";
  mk->add_option("--n", mk_n, "number of training clips");
  mk->add_option("--seed", mk_seed, "corpus seed");
  mk->add_option("--out", mk_out, "output directory")->required();

  // train-stage1
  auto* t1 = app.add_subcommand("train-stage1", "representation learning");
  std::string t1_cfg, t1_out = "ckpt_stage1";
  bool t1_resume = false;
  t1->add_option("--config", t1_cfg, "run config JSON")->required();
  t1->add_option("--out", t1_out, "checkpoint directory");
  t1->add_flag("--resume", t1_resume, "resume from --out");

  // train-stage2
  auto* t2 = app.add_subcommand("train-stage2", "instruction tuning");
  std::string t2_cfg, t2_init, t2_out = "ckpt_stage2", t2_lm;
  t2->add_option("--config", t2_cfg, "run config JSON")->required();
  t2->add_option("--init", t2_init, "stage-1 checkpoint directory")->required();
  t2->add_option("--out", t2_out, "checkpoint directory");
  t2->add_option("--lm", t2_lm, "pretrained frozen LM archive (optional)");

  // ablate
  auto* ab = app.add_subcommand("ablate", "loss-component ablation grid");
  std::string ab_cfg, ab_grid = "paper", ab_data, ab_out = "ablation";
  ab->add_option("--config", ab_cfg, "run config JSON")->required();
  ab->add_option("--grid", ab_grid, "grid name (paper)");
  ab->add_option("--data", ab_data, "evaluation manifest JSONL")->required();
  ab->add_option("--out", ab_out, "output directory");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "run an evaluation suite");
  std::string ev_ckpt, ev_suite, ev_data, ev_out = "eval";
  ev->add_option("--ckpt", ev_ckpt, "checkpoint directory")->required();
  ev->add_option("--suite", ev_suite, "classify | retrieve | caption")
      ->required();
  ev->add_option("--data", ev_data, "manifest JSONL")->required();
  ev->add_option("--out", ev_out, "output directory");

  // answer
  auto* an = app.add_subcommand("answer", "answer an instruction for a clip");
  std::string an_ckpt, an_audio, an_instr;
  int an_max_new = 24;
  an->add_option("--ckpt", an_ckpt, "stage-2 checkpoint directory")
      ->required();
  an->add_option("--audio", an_audio, "WAV path or synth:{...} ref")
      ->required();
  an->add_option("--instruction", an_instr, "instruction text")->required();
  an->add_option("--max-new", an_max_new, "max generated tokens");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*mk) {
      mint::make_data(mk_n, mk_seed, mk_out);
      std::cout << "wrote " << mk_out << "/train.jsonl and eval.jsonl\n";
    } else if (*t1) {
      std::string path =
          mint::train_stage1(mint::load_run_config(t1_cfg), t1_out, t1_resume);
      std::cout << "stage-1 checkpoint: " << path << "\n";
    } else if (*t2) {
      std::string path = mint::train_stage2(mint::load_run_config(t2_cfg),
                                            t2_init, t2_out, t2_lm);
      std::cout << "stage-2 checkpoint: " << path << "\n";
    } else if (*ab) {
      if (ab_grid != "paper")
        throw std::runtime_error("unknown grid: " + ab_grid);
      auto rows = mint::run_ablation(mint::load_run_config(ab_cfg),
                                     mint::paper_ablation_grid(), ab_data,
                                     ab_out);
      std::cout << mint::ablation_table_markdown(rows);
    } else if (*ev) {
      std::cout << mint::evaluate_suite(ev_ckpt, ev_suite, ev_data, ev_out)
                << "\n";
    } else if (*an) {
      std::cout << mint::answer_from_checkpoint(an_ckpt, an_audio, an_instr,
                                                an_max_new)
                << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
