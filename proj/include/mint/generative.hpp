// Stage 2: instruction-aware extraction, soft audio prompts for the
// frozen LM, and response-only language modeling.

#pragma once

#include <string>
#include <vector>

#include "mint/bridge_net.hpp"
#include "mint/frozen.hpp"

namespace mint {

struct Stage2Batch {
  std::vector<AudioFeatureMap> audio;
  std::vector<TokenSequence> instructions;  // plain tokens, no specials
  std::vector<TokenSequence> responses;     // plain tokens, no specials
  std::vector<std::string> template_ids;

  int size() const { return static_cast<int>(audio.size()); }
};

class GenerativeStage {
 public:
  GenerativeStage(BridgeNet& bridge, FrozenLM& lm, const Vocabulary& vocab);

  // Adds the fresh FC projection tensors to the bridge store.
  void init_projection(unsigned seed);

  // Bidirectional [queries | instruction] forward; query rows only.
  Var extract_instruction_aware(Tape& tape, const AudioFeatureMap& audio,
                                const TokenSequence& instruction);

  Var project_to_lm(Tape& tape, Var query_out);

  // Per-record LM stream: [soft prompt | DEC instr response EOS], with
  // cross-entropy on response positions (EOS included) only.
  Var stage2_loss(Tape& tape, const Stage2Batch& batch);

  Mat soft_prompt(const AudioFeatureMap& audio,
                  const TokenSequence& instruction);

  std::string answer(const AudioFeatureMap& audio,
                     const std::string& instruction, int max_new);

  double score_candidate(const AudioFeatureMap& audio,
                         const TokenSequence& instruction,
                         const std::string& candidate);

  BridgeNet& bridge() { return bridge_; }
  FrozenLM& lm() { return lm_; }
  const Vocabulary& vocab() const { return vocab_; }

 private:
  BridgeNet& bridge_;
  FrozenLM& lm_;
  const Vocabulary& vocab_;
};

}  // namespace mint
