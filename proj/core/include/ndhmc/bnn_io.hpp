#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "ndhmc/bnn.hpp"

namespace ndhmc {

// PosteriorSpec JSON document:
//   {
//     "architecture": {"layer_dims": [1, 50, 1], "activation": "relu",
//                      "leaky_slope": 0.01, "zero_subderivative": 0.0},
//     "prior_scale": 1.0,
//     "noise_scale": 0.1,
//     "data": {"inputs": [[x11, ...], ...], "targets": [[y11, ...], ...]}
//   }
// "data" may be omitted (prior-only posterior).
std::string spec_to_json(const PosteriorSpec& spec, int indent = 2);
PosteriorSpec spec_from_json(const std::string& text);

std::string architecture_to_json(const MLPArchitecture& arch);
MLPArchitecture architecture_from_json(const std::string& text);

void save_spec(const std::filesystem::path& path, const PosteriorSpec& spec);
PosteriorSpec load_spec(const std::filesystem::path& path);

// Parameter vectors: uint64 little-endian length header followed by that many
// little-endian IEEE-754 doubles.
void write_params_binary(std::ostream& out, ConstSpan params);
Vector read_params_binary(std::istream& in);
void save_params_binary(const std::filesystem::path& path, ConstSpan params);
Vector load_params_binary(const std::filesystem::path& path);

// Debug CSV: header "index,value", one row per parameter.
void write_params_csv(std::ostream& out, ConstSpan params);
Vector read_params_csv(std::istream& in);

}  // namespace ndhmc
