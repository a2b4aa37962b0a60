#include "mint/generative.hpp"

#include <stdexcept>

#include "mint/nn.hpp"

namespace mint {

namespace {

std::vector<int> valid_ids(const TokenSequence& seq) {
  std::vector<int> out;
  for (int i = 0; i < seq.length(); ++i)
    if (seq.valid_mask[i]) out.push_back(seq.ids[i]);
  return out;
}

TokenSequence from_ids(const std::vector<int>& ids) {
  TokenSequence s;
  s.ids = ids;
  s.valid_mask.assign(ids.size(), true);
  return s;
}

}  // namespace

GenerativeStage::GenerativeStage(BridgeNet& bridge, FrozenLM& lm,
                                 const Vocabulary& vocab)
    : bridge_(bridge), lm_(lm), vocab_(vocab) {}

void GenerativeStage::init_projection(unsigned seed) {
  std::mt19937_64 rng(seed);
  bridge_.params().add(
      "fc_proj.w",
      nn::randn(bridge_.config().hidden_dim, lm_.config().lm_dim, rng, 0.02));
  bridge_.params().add("fc_proj.b", Mat::Zero(1, lm_.config().lm_dim));
}

Var GenerativeStage::extract_instruction_aware(Tape& tape,
                                               const AudioFeatureMap& audio,
                                               const TokenSequence& instr) {
  int nq = bridge_.config().num_queries;
  if (instr.length() == 0) {
    AttentionMaskPlan mask = build_bidirectional_mask(nq, {});
    return bridge_.forward(tape, &audio, nullptr, mask).query_out;
  }
  AttentionMaskPlan mask = build_bidirectional_mask(nq, instr.valid_mask);
  return bridge_.forward(tape, &audio, &instr, mask).query_out;
}

Var GenerativeStage::project_to_lm(Tape& tape, Var query_out) {
  if (query_out.cols() != bridge_.config().hidden_dim)
    throw std::runtime_error("project_to_lm: width mismatch");
  return tape.add_row_broadcast(
      tape.matmul(query_out, tape.param(bridge_.params(), "fc_proj.w")),
      tape.param(bridge_.params(), "fc_proj.b"));
}

Var GenerativeStage::stage2_loss(Tape& tape, const Stage2Batch& batch) {
  if (batch.size() == 0) throw std::runtime_error("empty batch");
  std::vector<Var> losses;
  std::vector<double> weights;
  double total_tokens = 0.0;

  for (int r = 0; r < batch.size(); ++r) {
    std::vector<int> instr = valid_ids(batch.instructions[r]);
    std::vector<int> resp = valid_ids(batch.responses[r]);
    if (resp.empty()) throw std::runtime_error("empty response");

    Var qo = extract_instruction_aware(tape, batch.audio[r],
                                       batch.instructions[r]);
    Var prompt = project_to_lm(tape, qo);

    std::vector<int> ids;
    ids.push_back(static_cast<int>(Special::DEC));
    ids.insert(ids.end(), instr.begin(), instr.end());
    long resp_start = static_cast<long>(ids.size());
    ids.insert(ids.end(), resp.begin(), resp.end());
    ids.push_back(static_cast<int>(Special::EOS));

    std::vector<bool> valid(ids.size(), true);
    Var logits = lm_.forward(tape, prompt, ids, valid);

    long t = static_cast<long>(ids.size());
    std::vector<int> targets(t, 0);
    std::vector<bool> use(t, false);
    int n_tok = 0;
    for (long k = 0; k + 1 < t; ++k) {
      if (k + 1 >= resp_start) {  // predicting a response token or EOS
        targets[k] = ids[k + 1];
        use[k] = true;
        ++n_tok;
      }
    }
    losses.push_back(tape.cross_entropy_rows(logits, targets, use));
    weights.push_back(n_tok);
    total_tokens += n_tok;
  }

  Var acc = tape.scale(losses[0], weights[0] / total_tokens);
  for (size_t i = 1; i < losses.size(); ++i)
    acc = tape.add(acc, tape.scale(losses[i], weights[i] / total_tokens));
  return acc;
}

Mat GenerativeStage::soft_prompt(const AudioFeatureMap& audio,
                                 const TokenSequence& instruction) {
  Tape tape;
  Var qo = extract_instruction_aware(tape, audio, instruction);
  return project_to_lm(tape, qo).val();
}

std::string GenerativeStage::answer(const AudioFeatureMap& audio,
                                    const std::string& instruction,
                                    int max_new) {
  if (!bridge_.params().has("fc_proj.w"))
    throw std::runtime_error("stage-2 checkpoint required");
  std::vector<int> instr_ids;
  for (const std::string& tok : split_lower(instruction))
    instr_ids.push_back(vocab_.id_of(tok));
  TokenSequence instr = from_ids(instr_ids);

  Mat prompt = soft_prompt(audio, instr);

  std::vector<int> prompt_ids;
  prompt_ids.push_back(static_cast<int>(Special::DEC));
  prompt_ids.insert(prompt_ids.end(), instr_ids.begin(), instr_ids.end());
  TokenSequence generated =
      lm_.lm_generate_greedy(prompt, from_ids(prompt_ids), max_new);
  return decode(vocab_, generated);
}

double GenerativeStage::score_candidate(const AudioFeatureMap& audio,
                                        const TokenSequence& instruction,
                                        const std::string& candidate) {
  Mat prompt = soft_prompt(audio, instruction);
  std::vector<int> prompt_ids;
  prompt_ids.push_back(static_cast<int>(Special::DEC));
  for (int id : valid_ids(instruction)) prompt_ids.push_back(id);
  std::vector<int> cand_ids;
  for (const std::string& tok : split_lower(candidate))
    cand_ids.push_back(vocab_.id_of(tok));
  return lm_.lm_score(prompt, from_ids(prompt_ids), from_ids(cand_ids));
}

}  // namespace mint
