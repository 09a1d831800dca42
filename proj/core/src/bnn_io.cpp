#include "ndhmc/bnn_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "ndhmc/csv.hpp"

namespace ndhmc {

using nlohmann::json;

namespace {

json arch_json(const MLPArchitecture& arch) {
  return json{{"layer_dims", arch.layer_dims},
              {"activation", std::string(to_string(arch.activation))},
              {"leaky_slope", arch.leaky_slope},
              {"zero_subderivative", arch.zero_subderivative}};
}

MLPArchitecture arch_from(const json& j) {
  MLPArchitecture arch;
  arch.layer_dims = j.at("layer_dims").get<std::vector<std::size_t>>();
  arch.activation = parse_activation(j.at("activation").get<std::string>());
  arch.leaky_slope = j.value("leaky_slope", 0.01);
  arch.zero_subderivative = j.value("zero_subderivative", 0.0);
  arch.validate();
  return arch;
}

json matrix_json(const Vector& flat, std::size_t cols) {
  json rows = json::array();
  for (std::size_t i = 0; i < flat.size() / cols; ++i)
    rows.push_back(std::vector<double>(flat.begin() + i * cols, flat.begin() + (i + 1) * cols));
  return rows;
}

Vector matrix_from(const json& rows, std::size_t cols) {
  Vector flat;
  for (const auto& row : rows) {
    auto r = row.get<std::vector<double>>();
    require(r.size() == cols, "spec json: matrix row has wrong width");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return flat;
}

// Host order is converted explicitly so files are little-endian everywhere.
std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
  return v;
}

}  // namespace

std::string architecture_to_json(const MLPArchitecture& arch) { return arch_json(arch).dump(); }

MLPArchitecture architecture_from_json(const std::string& text) {
  try {
    return arch_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ContractError(std::string("architecture json: ") + e.what());
  }
}

std::string spec_to_json(const PosteriorSpec& spec, int indent) {
  json j{{"architecture", arch_json(spec.arch)},
         {"prior_scale", spec.prior_scale},
         {"noise_scale", spec.noise_scale}};
  j["data"] = json{{"inputs", matrix_json(spec.data.inputs, spec.data.input_dim)},
                   {"targets", matrix_json(spec.data.targets, spec.data.output_dim)}};
  return j.dump(indent);
}

PosteriorSpec spec_from_json(const std::string& text) try {
  const json j = json::parse(text);
  PosteriorSpec spec;
  spec.arch = arch_from(j.at("architecture"));
  spec.prior_scale = j.value("prior_scale", 1.0);
  spec.noise_scale = j.value("noise_scale", 0.1);
  spec.data.input_dim = spec.arch.input_dim();
  spec.data.output_dim = spec.arch.output_dim();
  if (j.contains("data")) {
    spec.data.inputs = matrix_from(j["data"].at("inputs"), spec.data.input_dim);
    spec.data.targets = matrix_from(j["data"].at("targets"), spec.data.output_dim);
  }
  spec.validate();
  return spec;
} catch (const json::exception& e) {
  throw ContractError(std::string("spec json: ") + e.what());
}

void save_spec(const std::filesystem::path& path, const PosteriorSpec& spec) {
  write_text_file(path, spec_to_json(spec) + "\n");
}

PosteriorSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return spec_from_json(ss.str());
}

void write_params_binary(std::ostream& out, ConstSpan params) {
  const std::uint64_t n = to_le(params.size());
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (double v : params) {
    const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(v));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!out) throw std::runtime_error("write_params_binary: stream failure");
}

Vector read_params_binary(std::istream& in) {
  std::uint64_t n = 0;
  if (!in.read(reinterpret_cast<char*>(&n), sizeof n))
    throw std::runtime_error("read_params_binary: missing length header");
  n = to_le(n);
  Vector out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits))
      throw std::runtime_error("read_params_binary: truncated payload");
    out.push_back(std::bit_cast<double>(to_le(bits)));
  }
  return out;
}

void save_params_binary(const std::filesystem::path& path, ConstSpan params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_params_binary(out, params);
}

Vector load_params_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_params_binary(in);
}

void write_params_csv(std::ostream& out, ConstSpan params) {
  CsvWriter w(out);
  w.header({"index", "value"});
  for (std::size_t i = 0; i < params.size(); ++i) {
    w.cell(static_cast<unsigned long long>(i)).cell(params[i]);
    w.end_row();
  }
}

Vector read_params_csv(std::istream& in) {
  const CsvTable t = read_csv(in);
  Vector out(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto idx = static_cast<std::size_t>(t.number(r, "index"));
    require(idx < out.size(), "params csv: index out of range");
    out[idx] = t.number(r, "value");
  }
  return out;
}

}  // namespace ndhmc
