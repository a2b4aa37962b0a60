// Parameter archive: JSON header naming tensors + raw little-endian
// doubles, in one file.

#pragma once

#include <cstdint>
#include <string>

#include "mint/autograd.hpp"

namespace mint {

void save_params(const ParamStore& store, const std::string& path);

// Loads into an existing store; every tensor must already exist with a
// matching shape (the error names the offending tensor). extend=true
// instead adds unknown tensors.
void load_params(ParamStore& store, const std::string& path,
                 bool extend = false);

// FNV-1a over the archived tensor bytes; stable across runs.
uint64_t hash_params(const ParamStore& store);
std::string hash_params_hex(const ParamStore& store);

}  // namespace mint
