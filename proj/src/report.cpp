#include "parcalm/report.hpp"

#include <cmath>

namespace parcalm {

namespace {

Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json vec_list(const std::vector<Vec>& vs) {
  Json a = Json::array();
  for (const Vec& v : vs) a.push_back(to_json(v));
  return a;
}

Json conditions(const std::vector<Condition>& cs) {
  Json a = Json::array();
  for (const auto& c : cs) a.push_back({{"name", c.name}, {"value", num(c.value)}, {"ok", c.ok}});
  return a;
}

Json doubles(const std::vector<double>& v) {
  Json a = Json::array();
  for (double d : v) a.push_back(num(d));
  return a;
}

Json ratio_sample(const RatioSample& s) {
  return {{"x", num(s.x)}, {"y", to_json(s.y)}, {"v", num(s.v)}, {"numerator", num(s.numerator)},
          {"ratio", num(s.ratio)}};
}

}  // namespace

Json to_json(const Vec& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

Json to_json(const Mat& A) {
  Json a = Json::array();
  for (int i = 0; i < A.rows(); ++i) a.push_back(to_json(Vec(A.row(i).transpose())));
  return a;
}

Json constraint_names(const std::vector<int>& idx) {
  Json a = Json::array();
  for (int j : idx) a.push_back("g" + std::to_string(j + 1));
  return a;
}

Json to_json(const Tolerances& t) {
  return {{"active", t.active},       {"rank", t.rank},         {"multiplier", t.multiplier},
          {"eigenvalue", t.eigenvalue}, {"residual", t.residual}, {"grid", t.grid},
          {"multistart", t.multistart}};
}

Json to_json(const MultiplierSet& s) {
  return {{"kind", to_string(s.kind)},
          {"fritz_john", s.fritz_john},
          {"active", constraint_names(s.active)},
          {"vertices", vec_list(s.vertices)},
          {"rays", vec_list(s.rays)},
          {"residual", num(s.residual)}};
}

Json to_json(const StationarityFlags& f) {
  return {{"feasible", f.feasible}, {"gc", f.is_gc}, {"fj", f.is_fj}, {"kkt", f.is_kkt},
          {"b_status", to_string(f.b_status)}};
}

Json to_json(const NDReport& nd) {
  return {{"licq", {{"holds", nd.licq.holds},
                    {"rank", nd.licq.rank},
                    {"active_count", nd.licq.active_count},
                    {"singular_values", to_json(nd.licq.singular_values)}}},
          {"mfcq", {{"holds", nd.mfcq.holds}, {"direction", to_json(nd.mfcq.direction)},
                    {"weights", to_json(nd.mfcq.weights)}, {"margin", num(nd.mfcq.margin)}}},
          {"sc", nd.sc},
          {"vanishing", constraint_names(nd.vanishing)},
          {"lagrange", to_json(nd.lagrange)},
          {"soc", {{"defined", nd.soc.defined}, {"holds", nd.soc.holds},
                   {"eigenvalues", to_json(nd.soc.eigenvalues)}}},
          {"full_rank", nd.full_rank}};
}

Json to_json(const ClassificationReport& c) {
  Json j = {{"x", num(c.x)},
            {"y", to_json(c.y)},
            {"type", to_string(c.type)},
            {"case", to_string(c.simple)},
            {"reason", c.reason},
            {"active", constraint_names(c.active)},
            {"stationarity", to_json(c.flags)},
            {"nondegeneracy", to_json(c.nd)},
            {"fj_multipliers", to_json(c.fj)},
            {"kkt_multipliers", to_json(c.kkt)}};
  if (c.simple != SimplicityCase::Unchecked) {
    j["case_reason"] = c.simple_reason;
    j["minimizers"] = vec_list(c.minimizers);
    j["value"] = num(c.value);
    Json types = Json::array();
    for (PointType t : c.member_types) types.push_back(to_string(t));
    j["member_types"] = types;
    if (c.simple == SimplicityCase::II) {
      j["alpha"] = num(c.alpha);
      j["alpha_fd"] = num(c.alpha_fd);
    }
  }
  return j;
}

Json to_json(const CurveSegment& c) {
  Json samples = Json::array();
  for (const auto& s : c.samples)
    samples.push_back({{"x", num(s.x)}, {"y", to_json(s.y)}, {"u", to_json(s.u)},
                       {"active", constraint_names(s.J)}, {"type", to_string(s.type)}, {"event", s.event}});
  Json events = Json::array();
  for (const auto& e : c.events) {
    Json ev = {{"x", num(e.x)}, {"kind", to_string(e.kind)}, {"detail", e.detail}};
    if (e.index >= 0) ev["constraint"] = "g" + std::to_string(e.index + 1);
    events.push_back(ev);
  }
  return {{"stop_reason", c.stop_reason}, {"events", events}, {"samples", samples}};
}

Json to_json(const LowerSolution& s) {
  return {{"x", num(s.x)},
          {"value", num(s.value)},
          {"minimizers", vec_list(s.points)},
          {"multipliers", vec_list(s.multipliers)},
          {"inconclusive", s.inconclusive},
          {"note", s.note}};
}

Json to_json(const SolutionMap& s) {
  Json rows = Json::array();
  for (const auto& r : s.rows) rows.push_back(to_json(r));
  return {{"rows", rows}};
}

Json to_json(const MpccLicqReport& r) {
  return {{"fritz_john", r.fritz_john},
          {"active", constraint_names(r.J)},
          {"vanishing", constraint_names(r.K)},
          {"matrix", to_json(r.matrix)},
          {"singular_values", to_json(r.singular_values)},
          {"rank", r.rank},
          {"columns", static_cast<int>(r.matrix.cols())},
          {"full_column_rank", r.full_column_rank},
          {"reduces_to_licq", r.reduces_to_licq}};
}

Json to_json(const StationarityReport& r) {
  Json direct = {{"verdict", to_string(r.direct)},
                 {"note", r.direct_note},
                 {"w", to_json(r.w)},
                 {"xi", to_json(r.xi)},
                 {"residual", num(r.residual)},
                 {"residual_tol", num(r.residual_tol)},
                 {"signs", conditions(r.signs)},
                 {"matrix", to_json(r.matrix)},
                 {"rhs", to_json(r.rhs)}};
  if (r.case_id == 6) {
    direct["mu"] = num(r.mu);
    direct["lambda"] = to_json(r.lambda);
  }
  Json implicit = {{"verdict", to_string(r.implicit)},
                   {"note", r.implicit_note},
                   {"conditions", conditions(r.implicit_conditions)},
                   {"drift", doubles(r.gamma)},
                   {"drift_fd", doubles(r.gamma_fd)}};
  Json j = {{"case", r.case_id},
            {"case_name", r.case_name},
            {"type", to_string(r.type)},
            {"active", constraint_names(r.active)},
            {"ubar", to_json(r.ubar)},
            {"u0", num(r.u0)},
            {"special", constraint_names(r.special)}};
  if (r.ubar2.size()) j["ubar2"] = to_json(r.ubar2);
  if (r.y2.size()) j["y2"] = to_json(r.y2);
  j["direct"] = direct;
  j["implicit"] = implicit;
  j["agreement"] = r.agreement;
  return j;
}

Json to_json(const PEBReport& r) {
  Json levels = Json::array();
  for (std::size_t i = 0; i < r.level_L.size(); ++i)
    levels.push_back({{"samples", i < r.level_samples.size() ? r.level_samples[i] : 0}, {"L", num(r.level_L[i])}});
  return {{"condition", to_string(r.condition)},
          {"numerator", r.uwsm ? "dist to S(x)" : "dist to M"},
          {"radius", num(r.radius)},
          {"v_max", num(r.v_max)},
          {"samples", r.samples},
          {"used", r.used},
          {"dropped", r.dropped},
          {"L", num(r.L)},
          {"verdict", to_string(r.verdict)},
          {"worst", ratio_sample(r.worst)},
          {"levels", levels}};
}

Json to_json(const CalmnessReport& r) {
  return {{"condition", to_string(r.condition)},
          {"mu", num(r.mu)},
          {"radius", num(r.radius)},
          {"samples", r.samples},
          {"dropped", r.dropped},
          {"min_value", num(r.min_value)},
          {"holds", r.holds},
          {"witness", {{"x", num(r.witness.x)}, {"y", to_json(r.witness.y)}, {"value", num(r.witness.value)}}}};
}

Json to_json(const FjMinReport& r) {
  return {{"samples", r.samples},
          {"max_distance", num(r.max_distance)},
          {"worst", {{"x", num(r.worst.x)}, {"y", to_json(r.worst.y)}}}};
}

Json to_json(const BilevelSolution& s) {
  return {{"x", num(s.x)}, {"y", to_json(s.y)}, {"F", num(s.F)}, {"grid_points", s.grid_points},
          {"inconclusive", s.inconclusive}, {"note", s.note}};
}

Json to_json(const CorpusSummary& s) {
  Json outcomes = Json::array();
  for (const auto& o : s.outcomes)
    outcomes.push_back({{"entry", o.entry}, {"expectation", o.what}, {"passed", o.passed},
                        {"detail", o.detail}, {"seconds", o.seconds}});
  return {{"failures", s.failures}, {"seconds", s.seconds}, {"outcomes", outcomes}};
}

}  // namespace parcalm
