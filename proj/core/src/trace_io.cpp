#include <ostream>

#include <json.hpp>

#include "ndhmc/csv.hpp"
#include "ndhmc/symplectic.hpp"

namespace ndhmc {

using nlohmann::json;

void write_trace_csv(std::ostream& out, const TrajectoryTrace& trace) {
  CsvWriter w(out);
  w.header({"step", "H0", "H1", "deltaH", "n_crossings", "divergent"});
  for (std::size_t s = 0; s < trace.records.size(); ++s) {
    const StepRecord& r = trace.records[s];
    w.cell(static_cast<unsigned long long>(s))
        .cell(r.h0)
        .cell(r.h1)
        .cell(r.delta_h)
        .cell(static_cast<unsigned long long>(r.crossings.size()))
        .cell(r.divergent);
    w.end_row();
  }
}

namespace {
// JSON has no inf/nan; encode them as strings.
json number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

json numbers(const Vector& v) {
  json a = json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}
}  // namespace

std::string trace_to_json(const Potential& potential, const TrajectoryTrace& trace, int indent) {
  json records = json::array();
  for (const StepRecord& r : trace.records) {
    json crossings = json::array();
    for (const CrossingEvent& e : r.crossings) {
      crossings.push_back({{"time", e.time},
                           {"point", numbers(e.point)},
                           {"surface", json::parse(potential.describe_surface(e.surface))},
                           {"surface_index", e.surface},
                           {"sign_before", e.sign_before},
                           {"sign_after", e.sign_after},
                           {"grad_before", numbers(e.grad_before)},
                           {"grad_after", numbers(e.grad_after)},
                           {"jump", numbers(e.jump)}});
    }
    records.push_back({{"q0", numbers(r.q0)},
                       {"p0", numbers(r.p0)},
                       {"p_half", numbers(r.p_half)},
                       {"q1", numbers(r.q1)},
                       {"p1", numbers(r.p1)},
                       {"H0", number(r.h0)},
                       {"H1", number(r.h1)},
                       {"deltaH", number(r.delta_h)},
                       {"divergent", r.divergent},
                       {"crossings", std::move(crossings)}});
  }
  json j{{"step_size", trace.step_size},
         {"steps", trace.steps},
         {"initial", {{"q", numbers(trace.initial.q)}, {"p", numbers(trace.initial.p)}}},
         {"final", {{"q", numbers(trace.final_state.q)}, {"p", numbers(trace.final_state.p)}}},
         {"total_deltaH", number(trace.total_delta_h)},
         {"divergent", trace.divergent},
         {"records", std::move(records)}};
  return j.dump(indent);
}

}  // namespace ndhmc
