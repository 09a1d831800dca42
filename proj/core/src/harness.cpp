#include "ndhmc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ndhmc/csv.hpp"
#include "ndhmc/nondiff.hpp"
#include "ndhmc/parallel.hpp"
#include "ndhmc/potential.hpp"
#include "ndhmc/proxy.hpp"
#include "ndhmc/scaling.hpp"
#include "ndhmc/stats.hpp"

namespace ndhmc {

using nlohmann::json;

RegressionDataset generate_synthetic(std::size_t n, std::uint64_t seed, double noise) {
  require(n >= 1, "generate_synthetic: n must be >= 1");
  require(noise >= 0.0, "generate_synthetic: noise must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, 4.0);
  std::normal_distribution<double> eps(0.0, 1.0);
  RegressionDataset data;
  data.inputs.resize(n);
  data.targets.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = ux(rng);
    data.inputs[i] = x;
    data.targets[i] = std::cos(2.0 * x) + noise * eps(rng);
  }
  return data;
}

namespace {

const std::pair<ExperimentKind, const char*> kKindNames[] = {
    {ExperimentKind::GenerateData, "generate-data"},
    {ExperimentKind::Grid, "grid"},
    {ExperimentKind::EfficiencySweep, "efficiency-sweep"},
    {ExperimentKind::DimSweep, "dim-sweep"},
    {ExperimentKind::ErrorOrder, "error-order"},
    {ExperimentKind::CrossingStats, "crossing-stats"},
    {ExperimentKind::ProxyScaling, "proxy-scaling"},
    {ExperimentKind::TuningCurves, "tuning-curves"},
};

}  // namespace

std::string to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
  for (const auto& [k, n] : kKindNames)
    if (name == n) return k;
  if (name == "run-grid") return ExperimentKind::Grid;
  throw ContractError("unknown experiment kind: " + name);
}

ExperimentManifest ExperimentManifest::defaults_for(ExperimentKind kind) {
  ExperimentManifest m;
  m.kind = kind;
  switch (kind) {
    case ExperimentKind::EfficiencySweep:
      m.travel_time = 0.1;
      m.steps.clear();
      m.epsilons = {0.0005, 0.0010, 0.0015, 0.0020, 0.0025, 0.0030, 0.0035, 0.0040};
      break;
    case ExperimentKind::DimSweep:
      m.architectures = {{10}, {50}, {100}, {200}, {400}, {20}, {20, 20}, {20, 20, 20},
                         {20, 20, 20, 20}};
      m.steps = {200};
      m.epsilons = {0.001};
      break;
    case ExperimentKind::ErrorOrder:
      m.epsilons = dyadic_step_sizes(1e-5, 0, 6);
      m.crossing_epsilons = dyadic_step_sizes(1e-7, 0, 8);
      m.steps.clear();
      m.travel_time = 0.1;
      break;
    default:
      break;
  }
  return m;
}

std::string ExperimentManifest::default_output() const {
  switch (kind) {
    case ExperimentKind::GenerateData: return "synthetic.csv";
    case ExperimentKind::Grid: return "grid.csv";
    case ExperimentKind::EfficiencySweep: return "efficiency_sweep.csv";
    case ExperimentKind::DimSweep: return "dim_sweep.csv";
    case ExperimentKind::ErrorOrder: return "error_order.csv";
    case ExperimentKind::CrossingStats: return "crossing_stats.csv";
    case ExperimentKind::ProxyScaling: return "proxy_scaling.csv";
    case ExperimentKind::TuningCurves: return "tuning_curves.csv";
  }
  return "out.csv";
}

void ExperimentManifest::validate() const {
  require(n_data >= 1, "manifest: n_data must be >= 1");
  require(prior_scale > 0.0 && noise_scale > 0.0, "manifest: scales must be > 0");
  require(warm_step > 0.0 && warm_steps >= 1, "manifest: warm_step and warm_steps must be positive");
  switch (kind) {
    case ExperimentKind::Grid:
    case ExperimentKind::EfficiencySweep:
    case ExperimentKind::DimSweep:
      require(!activations.empty() && !architectures.empty() && !epsilons.empty(),
              "manifest: activations, architectures and epsilons must be non-empty");
      require(travel_time.has_value() || !steps.empty(), "manifest: need steps or travel_time");
      for (std::size_t L : steps) require(L >= 1, "manifest: steps must be >= 1");
      require(n_samples >= 1 && repeats >= 1, "manifest: n_samples and repeats must be >= 1");
      break;
    case ExperimentKind::ErrorOrder:
      require(regime == "local" || regime == "global", "manifest: regime must be local or global");
      require(epsilons.size() >= 2, "manifest: error-order needs at least two epsilons");
      require(crossing_epsilons.size() >= 2,
              "manifest: error-order needs at least two crossing_epsilons");
      for (double e : crossing_epsilons) require(e > 0.0, "manifest: crossing_epsilons must be positive");
      require(error_starts >= 1, "manifest: error_starts must be >= 1");
      require(!activations.empty() && !architectures.empty(),
              "manifest: activations and architectures must be non-empty");
      break;
    case ExperimentKind::CrossingStats:
      require(target == "laplace" || target == "bnn", "manifest: target must be laplace or bnn");
      require(crossing_step > 0.0 && crossing_samples >= 1, "manifest: bad crossing-stats settings");
      break;
    case ExperimentKind::ProxyScaling:
      require(l > 0.0 && !dims.empty() && samples_per_dim >= 2, "manifest: bad proxy-scaling settings");
      require(sigma_step > 0.0 && sigma_samples >= 1 && proxy_travel_time > 0.0,
              "manifest: bad sigma estimation settings");
      break;
    case ExperimentKind::TuningCurves:
      require(!orders.empty() && !sigmas.empty() && grid_points >= 3,
              "manifest: bad tuning-curve settings");
      break;
    case ExperimentKind::GenerateData:
      break;
  }
  for (double e : epsilons) require(e > 0.0 && std::isfinite(e), "manifest: epsilons must be > 0");
  if (travel_time) require(*travel_time > 0.0, "manifest: travel_time must be > 0");
}

namespace {

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json manifest_json(const ExperimentManifest& m) {
  json acts = json::array();
  for (Activation a : m.activations) acts.push_back(std::string(to_string(a)));
  json j{{"kind", to_string(m.kind)},
         {"seed", m.seed},
         {"output", m.output.empty() ? m.default_output() : m.output},
         {"activations", acts},
         {"architectures", m.architectures},
         {"epsilons", m.epsilons},
         {"crossing_epsilons", m.crossing_epsilons},
         {"steps", m.steps},
         {"n_samples", m.n_samples},
         {"burn_in", m.burn_in},
         {"repeats", m.repeats},
         {"n_data", m.n_data},
         {"n_test", m.n_test},
         {"data_seed", m.data_seed},
         {"prior_scale", m.prior_scale},
         {"noise_scale", m.noise_scale},
         {"zero_subderivative", m.zero_subderivative},
         {"divergence_cap", m.divergence_cap},
         {"regime", m.regime},
         {"crossing_fraction", m.crossing_fraction},
         {"error_starts", m.error_starts},
         {"warm_iterations", m.warm_iterations},
         {"warm_step", m.warm_step},
         {"warm_steps", m.warm_steps},
         {"target", m.target},
         {"crossing_step", m.crossing_step},
         {"crossing_samples", m.crossing_samples},
         {"a_grid", m.a_grid},
         {"l", m.l},
         {"dims", m.dims},
         {"samples_per_dim", m.samples_per_dim},
         {"exponent", m.exponent},
         {"proxy_travel_time", m.proxy_travel_time},
         {"sigma_step", m.sigma_step},
         {"sigma_samples", m.sigma_samples},
         {"orders", m.orders},
         {"sigmas", m.sigmas},
         {"grid_points", m.grid_points}};
  j["travel_time"] = m.travel_time ? json(*m.travel_time) : json(nullptr);
  return j;
}

}  // namespace

ExperimentManifest manifest_from_json(const std::string& text, std::optional<ExperimentKind> expected) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ContractError(std::string("manifest: invalid JSON: ") + e.what());
  }
  require(j.is_object(), "manifest: top level must be an object");

  ExperimentKind kind = expected.value_or(ExperimentKind::Grid);
  if (j.contains("kind")) {
    const ExperimentKind given = parse_experiment_kind(j.at("kind").get<std::string>());
    if (expected && given != *expected)
      throw ContractError("manifest kind '" + to_string(given) + "' does not match '" +
                          to_string(*expected) + "'");
    kind = given;
  }
  ExperimentManifest m = ExperimentManifest::defaults_for(kind);
  try {
    read_field(j, "seed", m.seed);
    read_field(j, "output", m.output);
    if (j.contains("activations")) {
      m.activations.clear();
      for (const auto& a : j.at("activations")) m.activations.push_back(parse_activation(a.get<std::string>()));
    }
    read_field(j, "architectures", m.architectures);
    read_field(j, "epsilons", m.epsilons);
    read_field(j, "crossing_epsilons", m.crossing_epsilons);
    read_field(j, "steps", m.steps);
    if (j.contains("travel_time")) {
      if (j.at("travel_time").is_null()) {
        m.travel_time.reset();
      } else {
        m.travel_time = j.at("travel_time").get<double>();
        if (!j.contains("steps")) m.steps.clear();
      }
    } else if (j.contains("steps")) {
      m.travel_time.reset();
    }
    read_field(j, "n_samples", m.n_samples);
    read_field(j, "burn_in", m.burn_in);
    read_field(j, "repeats", m.repeats);
    read_field(j, "n_data", m.n_data);
    read_field(j, "n_test", m.n_test);
    read_field(j, "data_seed", m.data_seed);
    read_field(j, "prior_scale", m.prior_scale);
    read_field(j, "noise_scale", m.noise_scale);
    read_field(j, "zero_subderivative", m.zero_subderivative);
    read_field(j, "divergence_cap", m.divergence_cap);
    read_field(j, "regime", m.regime);
    read_field(j, "crossing_fraction", m.crossing_fraction);
    read_field(j, "error_starts", m.error_starts);
    read_field(j, "warm_iterations", m.warm_iterations);
    read_field(j, "warm_step", m.warm_step);
    read_field(j, "warm_steps", m.warm_steps);
    read_field(j, "target", m.target);
    read_field(j, "crossing_step", m.crossing_step);
    read_field(j, "crossing_samples", m.crossing_samples);
    read_field(j, "a_grid", m.a_grid);
    read_field(j, "l", m.l);
    read_field(j, "dims", m.dims);
    read_field(j, "samples_per_dim", m.samples_per_dim);
    read_field(j, "exponent", m.exponent);
    read_field(j, "proxy_travel_time", m.proxy_travel_time);
    read_field(j, "sigma_step", m.sigma_step);
    read_field(j, "sigma_samples", m.sigma_samples);
    read_field(j, "orders", m.orders);
    read_field(j, "sigmas", m.sigmas);
    read_field(j, "grid_points", m.grid_points);
  } catch (const json::exception& e) {
    throw ContractError(std::string("manifest: bad field type: ") + e.what());
  }
  if (m.travel_time && m.kind != ExperimentKind::ErrorOrder) m.steps.clear();
  m.validate();
  return m;
}

std::string manifest_to_json(const ExperimentManifest& manifest, int indent) {
  return manifest_json(manifest).dump(indent);
}

ExperimentManifest load_manifest(const std::filesystem::path& path,
                                 std::optional<ExperimentKind> expected) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return manifest_from_json(ss.str(), expected);
}

std::uint64_t cell_seed(std::uint64_t master, std::uint64_t cell, std::uint64_t repeat) {
  return derive_seed(derive_seed(master, cell), repeat);
}

std::string hidden_label(const std::vector<std::size_t>& hidden) {
  std::string s;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(hidden[i]);
  }
  return s.empty() ? "0" : s;
}

namespace {

PosteriorSpec make_spec(const ExperimentManifest& m, Activation act,
                        const std::vector<std::size_t>& hidden, const RegressionDataset& data) {
  PosteriorSpec spec;
  spec.arch = make_mlp(1, hidden, 1, act);
  spec.arch.zero_subderivative = m.zero_subderivative;
  spec.data = data;
  spec.prior_scale = m.prior_scale;
  spec.noise_scale = m.noise_scale;
  spec.validate();
  return spec;
}

// Moves q by `warm_iterations` HMC transitions at (warm_step, warm_steps).
// Those transitions are not part of any reported chain.
Vector warm_up(const Potential& potential, Vector q, const ExperimentManifest& m,
               std::uint64_t seed) {
  if (m.warm_iterations == 0) return q;
  HMCConfig c;
  c.step_size = m.warm_step;
  c.steps = m.warm_steps;
  c.n_samples = 1;
  c.burn_in = m.warm_iterations;
  c.seed = seed;
  c.divergence_cap = m.divergence_cap;
  return hmc_chain(potential, q, c).samples.back();
}

struct CellDef {
  Activation activation;
  std::size_t arch;
  double step_size;
  std::size_t steps;
};

std::vector<CellDef> enumerate_cells(const ExperimentManifest& m) {
  std::vector<CellDef> cells;
  const std::size_t n_l = m.travel_time ? 1 : m.steps.size();
  for (Activation a : m.activations)
    for (std::size_t h = 0; h < m.architectures.size(); ++h)
      for (std::size_t li = 0; li < n_l; ++li)
        for (double eps : m.epsilons) {
          const std::size_t L =
              m.travel_time
                  ? static_cast<std::size_t>(std::max(1.0, std::round(*m.travel_time / eps)))
                  : m.steps[li];
          cells.push_back({a, h, eps, L});
        }
  return cells;
}

}  // namespace

std::vector<ResultRow> run_grid(const ExperimentManifest& manifest, std::size_t workers) {
  manifest.validate();
  const RegressionDataset data = generate_synthetic(manifest.n_data, manifest.data_seed);
  RegressionDataset test;
  if (manifest.n_test > 0) test = generate_synthetic(manifest.n_test, derive_seed(manifest.data_seed, 1));

  const std::vector<CellDef> cells = enumerate_cells(manifest);
  const std::size_t repeats = manifest.repeats;
  std::vector<ResultRow> rows(cells.size() * repeats);

  parallel_for(rows.size(), workers, [&](std::size_t task) {
    const std::size_t c = task / repeats, r = task % repeats;
    const CellDef& def = cells[c];
    const auto& hidden = manifest.architectures[def.arch];
    ResultRow& row = rows[task];
    row.cell = c;
    row.activation = def.activation;
    row.hidden = hidden_label(hidden);
    row.step_size = def.step_size;
    row.steps = def.steps;
    row.travel_time = def.step_size * static_cast<double>(def.steps);
    row.repeat = r;
    row.seed = cell_seed(manifest.seed, c, r);
    try {
      const PosteriorSpec spec = make_spec(manifest, def.activation, hidden, data);
      row.dim = spec.arch.param_dim();
      const BnnPotential potential(spec);
      HMCConfig config;
      config.step_size = def.step_size;
      config.steps = def.steps;
      config.n_samples = manifest.n_samples;
      config.burn_in = manifest.burn_in;
      config.seed = row.seed;
      config.divergence_cap = manifest.divergence_cap;
      config.keep_samples = manifest.n_test > 0;
      const Vector init = warm_up(potential, prior_draw(row.dim, spec.prior_scale, row.seed),
                                  manifest, derive_seed(row.seed, 1));
      const ChainResult chain = hmc_chain(potential, init, config);
      row.acceptance_rate = chain.acceptance_rate;
      row.efficiency = def.step_size * chain.acceptance_rate;
      row.n_divergent = chain.n_divergent;
      double sum = 0.0;
      std::size_t n = 0;
      for (double dh : chain.delta_h)
        if (std::isfinite(dh)) {
          sum += std::abs(dh);
          ++n;
        }
      row.mean_abs_delta_h = n ? sum / static_cast<double>(n) : std::nan("");
      if (manifest.n_test > 0) row.test_mse = predictive_mse(spec, chain.samples, test);
      row.seconds = chain.seconds;
    } catch (const std::exception& e) {
      row.error = e.what();
      if (row.error.empty()) row.error = "unknown error";
    }
  });
  return rows;
}

namespace {

// Keeps error messages from breaking the unquoted CSV format.
std::string sanitize(std::string s) {
  for (char& ch : s)
    if (ch == ',' || ch == '\n' || ch == '\r' || ch == '"') ch = ';';
  return s;
}

}  // namespace

void write_rows_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  CsvWriter w(out);
  w.header({"cell", "activation", "hidden", "d", "epsilon", "L", "T", "repeat", "seed",
            "acceptance_rate", "efficiency", "n_divergent", "mean_abs_delta_h", "test_mse",
            "error"});
  for (const ResultRow& r : rows) {
    w.cell(static_cast<unsigned long long>(r.cell))
        .cell(std::string(to_string(r.activation)))
        .cell(r.hidden)
        .cell(static_cast<unsigned long long>(r.dim))
        .cell(r.step_size)
        .cell(static_cast<unsigned long long>(r.steps))
        .cell(r.travel_time)
        .cell(static_cast<unsigned long long>(r.repeat))
        .cell(static_cast<unsigned long long>(r.seed))
        .cell(r.acceptance_rate)
        .cell(r.efficiency)
        .cell(static_cast<unsigned long long>(r.n_divergent))
        .cell(r.mean_abs_delta_h)
        .cell(r.test_mse)
        .cell(sanitize(r.error));
    w.end_row();
  }
}

std::vector<CellSummary> summarize_cells(const std::vector<ResultRow>& rows) {
  std::map<std::size_t, std::vector<const ResultRow*>> by_cell;
  for (const ResultRow& r : rows) by_cell[r.cell].push_back(&r);
  std::vector<CellSummary> out;
  for (const auto& [cell, group] : by_cell) {
    CellSummary s;
    s.cell = cell;
    s.activation = group.front()->activation;
    s.hidden = group.front()->hidden;
    s.dim = group.front()->dim;
    s.step_size = group.front()->step_size;
    s.steps = group.front()->steps;
    Vector acc;
    for (const ResultRow* r : group)
      if (r->error.empty()) acc.push_back(r->acceptance_rate);
    s.repeats = acc.size();
    if (acc.empty()) {
      s.mean_acceptance = s.se_acceptance = s.mean_efficiency = std::nan("");
    } else {
      s.mean_acceptance = mean(acc);
      s.se_acceptance = acc.size() > 1 ? standard_error(acc) : 0.0;
      s.mean_efficiency = s.step_size * s.mean_acceptance;
    }
    out.push_back(s);
  }
  return out;
}

std::vector<EfficiencyOptimum> efficiency_optima(const std::vector<ResultRow>& rows) {
  std::vector<EfficiencyOptimum> out;
  for (const CellSummary& s : summarize_cells(rows)) {
    if (!std::isfinite(s.mean_efficiency)) continue;
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const EfficiencyOptimum& o) { return o.activation == s.activation; });
    if (it == out.end()) {
      out.push_back({s.activation, s.step_size, s.mean_efficiency, s.mean_acceptance});
    } else if (s.mean_efficiency > it->peak_efficiency) {
      *it = {s.activation, s.step_size, s.mean_efficiency, s.mean_acceptance};
    }
  }
  return out;
}

namespace {

std::filesystem::path output_path(const ExperimentManifest& m, const std::filesystem::path& dir) {
  return dir / (m.output.empty() ? m.default_output() : m.output);
}

std::filesystem::path summary_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".json");
  return p;
}

void write_csv(const std::filesystem::path& path, const std::string& text) {
  write_text_file(path, text);
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::size_t run_chains(const ExperimentManifest& m, const std::filesystem::path& out_dir,
                       std::size_t workers, std::ostream& log, json& summary) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<ResultRow> rows = run_grid(m, workers);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::ostringstream csv;
  write_rows_csv(csv, rows);
  const auto path = output_path(m, out_dir);
  write_csv(path, csv.str());

  std::size_t failed = 0;
  json durations = json::array();
  for (const ResultRow& r : rows) {
    if (!r.error.empty()) {
      ++failed;
      log << "cell " << r.cell << " repeat " << r.repeat << " failed: " << r.error << "\n";
    }
    durations.push_back({{"cell", r.cell}, {"repeat", r.repeat}, {"seconds", r.seconds}});
  }
  json cells = json::array();
  for (const CellSummary& s : summarize_cells(rows)) {
    cells.push_back({{"cell", s.cell},
                     {"activation", std::string(to_string(s.activation))},
                     {"hidden", s.hidden},
                     {"d", s.dim},
                     {"epsilon", s.step_size},
                     {"L", s.steps},
                     {"mean_acceptance", number_or_null(s.mean_acceptance)},
                     {"se_acceptance", number_or_null(s.se_acceptance)},
                     {"repeats", s.repeats}});
  }
  summary["rows"] = rows.size();
  summary["failed"] = failed;
  summary["seconds"] = seconds;
  summary["cells"] = cells;
  summary["durations"] = durations;
  if (m.kind == ExperimentKind::EfficiencySweep) {
    json optima = json::array();
    for (const EfficiencyOptimum& o : efficiency_optima(rows)) {
      optima.push_back({{"activation", std::string(to_string(o.activation))},
                        {"best_epsilon", o.best_step_size},
                        {"peak_efficiency", o.peak_efficiency},
                        {"optimal_acceptance", o.optimal_acceptance}});
      log << to_string(o.activation) << ": peak efficiency " << format_double(o.peak_efficiency)
          << " at acceptance " << format_double(o.optimal_acceptance) << "\n";
    }
    summary["efficiency_optima"] = optima;
  }
  log << "wrote " << rows.size() << " rows to " << path.string() << " (" << failed
      << " failed)\n";
  return failed;
}

PhasePoint random_state(std::size_t d, double q_scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  PhasePoint s{Vector(d), Vector(d)};
  for (double& v : s.q) v = q_scale * normal(rng);
  for (double& v : s.p) v = normal(rng);
  return s;
}

// Anchor for error-order studies: warmed-up prior draw, fresh p ~ N(0, 1).
PhasePoint warm_state(const Potential& potential, const ExperimentManifest& m,
                      std::uint64_t seed) {
  PhasePoint s = random_state(potential.dim(), m.prior_scale, seed);
  s.q = warm_up(potential, std::move(s.q), m, derive_seed(seed, 1));
  return s;
}

std::size_t run_error_order(const ExperimentManifest& m, const std::filesystem::path& out_dir,
                            std::ostream& log, json& summary) {
  const RegressionDataset data = generate_synthetic(m.n_data, m.data_seed);
  std::ostringstream csv;
  CsvWriter w(csv);
  const bool local = m.regime == "local";
  if (local) {
    w.header({"activation", "regime", "epsilon", "delta_h", "predicted", "crossing_fraction",
              "slope", "r_squared", "residual_slope"});
  } else {
    w.header({"activation", "epsilon", "L", "T", "mean_abs_delta_h", "mean_crossings",
              "divergent", "slope", "r_squared"});
  }
  json fits = json::array();
  std::size_t failed = 0;
  for (std::size_t ai = 0; ai < m.activations.size(); ++ai) {
    const Activation act = m.activations[ai];
    const std::string name(to_string(act));
    try {
      const PosteriorSpec spec = make_spec(m, act, m.architectures.front(), data);
      const BnnPotential potential(spec);
      if (local) {
        LocalErrorOptions opts;
        opts.regime = is_piecewise_affine(act) ? LocalRegime::Crossing : LocalRegime::Smooth;
        opts.crossing_fraction = m.crossing_fraction;
        std::optional<LocalErrorStudy> study;
        std::string last_error;
        for (std::uint64_t attempt = 0; attempt < 32 && !study; ++attempt) {
          const PhasePoint anchor =
              warm_state(potential, m, derive_seed(m.seed, ai * 1000 + attempt));
          try {
            study = local_error_order(
                potential, anchor,
                opts.regime == LocalRegime::Crossing ? m.crossing_epsilons : m.epsilons, opts);
          } catch (const ConstructionError& e) {
            last_error = e.what();
          }
        }
        if (!study) throw ConstructionError("no usable anchor: " + last_error);
        const char* regime = opts.regime == LocalRegime::Crossing ? "crossing" : "smooth";
        const double residual_slope =
            opts.regime == LocalRegime::Crossing ? study->residual_fit.slope : std::nan("");
        for (std::size_t i = 0; i < study->epsilons.size(); ++i) {
          w.cell(name)
              .cell(regime)
              .cell(study->epsilons[i])
              .cell(study->measured[i])
              .cell(study->predicted[i])
              .cell(study->crossing_fraction[i])
              .cell(study->measured_fit.slope)
              .cell(study->measured_fit.r_squared)
              .cell(residual_slope);
          w.end_row();
        }
        fits.push_back({{"activation", name},
                        {"regime", regime},
                        {"slope", study->measured_fit.slope},
                        {"r_squared", study->measured_fit.r_squared},
                        {"residual_slope", number_or_null(residual_slope)}});
        log << name << " (" << regime << "): slope " << format_double(study->measured_fit.slope)
            << "\n";
      } else {
        std::vector<PhasePoint> starts;
        for (std::size_t s = 0; s < m.error_starts; ++s)
          starts.push_back(warm_state(potential, m, derive_seed(m.seed, ai * 1000 + s)));
        const double T = m.travel_time.value_or(0.1);
        const GlobalErrorStudy study = global_error_order(potential, starts, T, m.epsilons);
        for (std::size_t i = 0; i < study.epsilons.size(); ++i) {
          w.cell(name)
              .cell(study.epsilons[i])
              .cell(static_cast<unsigned long long>(study.steps[i]))
              .cell(T)
              .cell(study.mean_abs_delta_h[i])
              .cell(study.mean_crossings[i])
              .cell(static_cast<bool>(study.divergent[i]))
              .cell(study.fit.slope)
              .cell(study.fit.r_squared);
          w.end_row();
        }
        fits.push_back({{"activation", name},
                        {"regime", "global"},
                        {"slope", study.fit.slope},
                        {"r_squared", study.fit.r_squared}});
        log << name << " (global): slope " << format_double(study.fit.slope) << "\n";
      }
    } catch (const std::exception& e) {
      ++failed;
      fits.push_back({{"activation", name}, {"error", e.what()}});
      log << name << " failed: " << e.what() << "\n";
    }
  }
  write_csv(output_path(m, out_dir), csv.str());
  summary["fits"] = fits;
  summary["failed"] = failed;
  return failed;
}

std::size_t run_crossing_stats(const ExperimentManifest& m, const std::filesystem::path& out_dir,
                               std::size_t workers, std::ostream& log, json& summary) {
  CrossingTimeStats stats;
  if (m.target == "laplace") {
    const ProductPotential potential(PiecewiseAffine1D::laplace(), 1);
    const StateSampler sampler = [](std::mt19937_64& rng) {
      std::uniform_real_distribution<double> uq(-1.0, 1.0);
      std::normal_distribution<double> normal(0.0, 1.0);
      PhasePoint s{Vector(1), Vector(1)};
      s.q[0] = uq(rng);
      s.p[0] = normal(rng);
      return s;
    };
    stats = crossing_time_stats(potential, sampler, m.crossing_step, m.crossing_samples, m.a_grid,
                                m.seed, workers);
  } else {
    auto act = std::find_if(m.activations.begin(), m.activations.end(), is_piecewise_affine);
    require(act != m.activations.end(), "crossing-stats on a BNN needs a ReLU-family activation");
    const RegressionDataset data = generate_synthetic(m.n_data, m.data_seed);
    const PosteriorSpec spec = make_spec(m, *act, m.architectures.front(), data);
    const BnnPotential potential(spec);
    const std::size_t d = spec.arch.param_dim();
    const double scale = m.prior_scale;
    const StateSampler sampler = [d, scale](std::mt19937_64& rng) {
      std::normal_distribution<double> normal(0.0, 1.0);
      PhasePoint s{Vector(d), Vector(d)};
      for (double& v : s.q) v = scale * normal(rng);
      for (double& v : s.p) v = normal(rng);
      return s;
    };
    stats = crossing_time_stats(potential, sampler, m.crossing_step, m.crossing_samples, m.a_grid,
                                m.seed, workers);
  }
  std::ostringstream csv;
  write_crossing_stats_csv(csv, stats);
  write_csv(output_path(m, out_dir), csv.str());
  summary["n_single"] = stats.n_single;
  summary["n_multiple"] = stats.n_multiple;
  if (stats.a_grid.size() >= 2) {
    const LinearFit fit = least_squares(stats.a_grid, stats.fractions);
    summary["fraction_vs_a"] = {{"slope", fit.slope},
                                {"intercept", fit.intercept},
                                {"r_squared", fit.r_squared}};
    log << "window fraction vs a: slope " << format_double(fit.slope) << ", R^2 "
        << format_double(fit.r_squared) << "\n";
  }
  return 0;
}

std::size_t run_proxy_scaling(const ExperimentManifest& m, const std::filesystem::path& out_dir,
                              std::size_t workers, std::ostream& log, json& summary) {
  const PiecewiseAffine1D laplace = PiecewiseAffine1D::laplace();
  const SigmaEstimate sigma = estimate_sigma(laplace, m.sigma_step, m.sigma_samples,
                                             m.proxy_travel_time, derive_seed(m.seed, 0), workers);
  const auto rows = scaling_experiment(laplace, m.l, m.dims, m.samples_per_dim,
                                       derive_seed(m.seed, 1), m.proxy_travel_time, m.exponent,
                                       workers);
  std::ostringstream csv;
  write_scaling_csv(csv, rows);
  write_csv(output_path(m, out_dir), csv.str());
  const double predicted = acceptance_limit(1, m.l, sigma.sigma);
  summary["sigma"] = sigma.sigma;
  summary["mu"] = sigma.mu;
  summary["predicted_acceptance"] = predicted;
  log << "sigma estimate " << format_double(sigma.sigma) << ", predicted acceptance "
      << format_double(predicted) << "\n";
  return 0;
}

std::size_t run_tuning_curves(const ExperimentManifest& m, const std::filesystem::path& out_dir,
                              std::ostream& log, json& summary) {
  std::string text;
  json optima = json::array();
  for (int order : m.orders)
    for (double sigma : m.sigmas) {
      const EfficiencyCurve curve = efficiency_curve(order, sigma, m.grid_points);
      std::ostringstream part;
      write_efficiency_csv(part, curve);
      std::string s = part.str();
      if (!text.empty()) s.erase(0, s.find('\n') + 1);
      text += s;
      optima.push_back({{"order", order},
                        {"sigma", sigma},
                        {"l_opt", curve.l_opt},
                        {"a_opt", curve.a_opt},
                        {"efficiency_opt", curve.efficiency_opt}});
      log << "order " << order << ", sigma " << format_double(sigma) << ": a_opt "
          << format_double(curve.a_opt) << "\n";
    }
  write_csv(output_path(m, out_dir), text);
  summary["optima"] = optima;
  return 0;
}

std::size_t run_generate_data(const ExperimentManifest& m, const std::filesystem::path& out_dir,
                              std::ostream& log, json& summary) {
  auto write_data = [](const std::filesystem::path& path, const RegressionDataset& data) {
    std::ostringstream csv;
    CsvWriter w(csv);
    w.header({"x", "y"});
    for (std::size_t i = 0; i < data.size(); ++i) {
      w.cell(data.inputs[i]).cell(data.targets[i]);
      w.end_row();
    }
    write_text_file(path, csv.str());
  };
  const auto path = output_path(m, out_dir);
  write_data(path, generate_synthetic(m.n_data, m.data_seed));
  summary["n"] = m.n_data;
  if (m.n_test > 0) {
    auto test_path = path;
    test_path.replace_filename(path.stem().string() + "_test.csv");
    write_data(test_path, generate_synthetic(m.n_test, derive_seed(m.data_seed, 1)));
    summary["n_test"] = m.n_test;
  }
  log << "wrote " << m.n_data << " points to " << path.string() << "\n";
  return 0;
}

}  // namespace

std::size_t run_experiment(const ExperimentManifest& manifest, const std::filesystem::path& out_dir,
                           std::size_t workers, std::ostream& log) {
  manifest.validate();
  json summary{{"manifest", manifest_json(manifest)}};
  std::size_t failed = 0;
  switch (manifest.kind) {
    case ExperimentKind::Grid:
    case ExperimentKind::EfficiencySweep:
    case ExperimentKind::DimSweep:
      failed = run_chains(manifest, out_dir, workers, log, summary);
      break;
    case ExperimentKind::ErrorOrder:
      failed = run_error_order(manifest, out_dir, log, summary);
      break;
    case ExperimentKind::CrossingStats:
      failed = run_crossing_stats(manifest, out_dir, workers, log, summary);
      break;
    case ExperimentKind::ProxyScaling:
      failed = run_proxy_scaling(manifest, out_dir, workers, log, summary);
      break;
    case ExperimentKind::TuningCurves:
      failed = run_tuning_curves(manifest, out_dir, log, summary);
      break;
    case ExperimentKind::GenerateData:
      failed = run_generate_data(manifest, out_dir, log, summary);
      break;
  }
  write_text_file(summary_path(output_path(manifest, out_dir)), summary.dump(2) + "\n");
  return failed;
}

}  // namespace ndhmc
