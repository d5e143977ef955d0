#include "cqa/report.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "cqa/cq.hpp"
#include "cqa/kkt.hpp"
#include "cqa/numlin.hpp"
#include "cqa/problem.hpp"
#include "cqa/tangent.hpp"

namespace cqa::report {

namespace {

using nlohmann::json;

json vec_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
    return a;
}

json active_set_json(const ActiveSet& as) {
    json slack = json::object();
    for (const auto& [l, s] : as.slack) slack[std::to_string(l)] = s;
    return {{"active", as.active},
            {"feasible", as.feasible},
            {"violated", as.violated},
            {"slack", slack},
            {"tolerance", as.tol}};
}

json rank_profile_json(const numlin::RankProfile& p) {
    std::vector<double> sigma(p.singular_values.begin(), p.singular_values.end());
    return {{"rank", p.rank},
            {"pivotLabels", p.pivot_labels},
            {"singularValues", sigma},
            {"marginal", p.marginal}};
}

json crc_json(const cq::CRCVerdict& v) {
    json j = {{"j", v.J},
              {"j2", v.J2},
              {"holds", cq::to_cstr(v.holds)},
              {"center", rank_profile_json(v.center)},
              {"maxSpanResidual", v.max_span_residual},
              {"note", v.note}};
    if (v.witness) j["witness"] = vec_json(*v.witness);
    return j;
}

json cq_report_json(const cq::CQReport& r) {
    json subsets = json::array();
    for (const cq::SubsetResult& s : r.subsets)
        subsets.push_back({{"s", s.S}, {"result", crc_json(s.verdict)}});
    return {{"overall", cq::to_cstr(r.overall)},
            {"sampled", r.sampled},
            {"failing", r.failing},
            {"subsets", subsets},
            {"conditionsNote", r.conditions_note},
            {"evidenceNote", r.evidence_note}};
}

json level_json(const tangent::LevelRecord& L) {
    return {{"t", L.t},
            {"ratio", L.ratio},
            {"jdResidual", L.jd_residual},
            {"monitoredViolation", L.monitored_violation},
            {"correctorOk", L.corrector_ok},
            {"witness", L.witness},
            {"note", L.note}};
}

json certificate_json(const tangent::TangencyCertificate& c) {
    json levels = json::array();
    for (const tangent::LevelRecord& L : c.levels) levels.push_back(level_json(L));
    return {{"direction", vec_json(c.d)},
            {"jd", c.Jd},
            {"j2", c.J2},
            {"levels", levels},
            {"verdict", tangent::to_cstr(c.verdict)},
            {"note", c.note}};
}

json h1_json(const tangent::H1Verdict& v) {
    json descent = json::object();
    for (const auto& [l, m] : v.descent) descent[std::to_string(l)] = m;
    return {{"refined", v.refined},
            {"descent", descent},
            {"verdict", tangent::to_cstr(v.verdict)},
            {"reason", v.reason}};
}

json oracle_json(const tangent::OracleResult& o) {
    json radii = json::array();
    for (const tangent::OracleRadius& r : o.radii)
        radii.push_back({{"radius", r.radius},
                         {"feasibleSamples", r.feasible_samples},
                         {"bestAngle", r.best_angle},
                         {"hit", r.hit}});
    return {{"outcome", tangent::to_cstr(o.outcome)}, {"radii", radii}, {"note", o.note}};
}

json abadie_json(const tangent::AbadieReport& r) {
    json battery = json::array();
    for (const tangent::DirectionResult& d : r.battery) {
        json e = {{"direction", vec_json(d.d)},
                  {"origin", d.origin},
                  {"tangency", tangent::to_cstr(d.certificate.verdict)},
                  {"h1", tangent::to_cstr(d.h1.verdict)}};
        if (!d.error.empty()) e["error"] = d.error;
        battery.push_back(e);
    }
    json j = {{"verdict", tangent::to_cstr(r.verdict)},
              {"battery", battery},
              {"spotChecked", r.spot_checked},
              {"spotCheckOk", r.spot_check_ok},
              {"note", r.note}};
    if (r.witness) j["witness"] = vec_json(*r.witness);
    return j;
}

json multipliers_json(const kkt::MultiplierResult& m) {
    json lambda = json::object();
    for (const auto& [l, v] : m.lambda) lambda[std::to_string(l)] = v;
    return {{"lambda", lambda},
            {"residual", m.residual},
            {"kkt", m.kkt},
            {"iterations", m.iterations},
            {"note", m.note}};
}

json input_json(const std::string& path, long truncation, const Eigen::VectorXd& point,
                const std::optional<std::string>& point_name) {
    json j = {{"file", path}, {"truncation", truncation}, {"point", vec_json(point)}};
    if (point_name) j["pointName"] = *point_name;
    return j;
}

json header_json() { return {{"tool", kToolName}, {"version", kToolVersion}}; }

}  // namespace

json run_analysis(const ProblemDocument& doc, const std::string& input_path,
                  const Eigen::VectorXd& point, const std::optional<std::string>& point_name,
                  const AnalyzeOptions& opt) {
    ConstraintSystem sys = ConstraintSystem::realize(doc, opt.truncation);
    json out = header_json();
    out["input"] = input_json(input_path, opt.truncation, point, point_name);
    out["parameters"] = {{"radius", opt.radius},      {"samples", opt.samples},
                         {"seed", opt.seed},          {"tolActive", opt.tol_act},
                         {"tolRank", opt.tol_rank},   {"tolResidual", opt.tol_res}};

    ActiveSet as = sys.active_set(point, opt.tol_act);
    out["activeSet"] = active_set_json(as);
    LinearizedCone cone = sys.linearized_cone(point, opt.tol_act);
    out["linearizedCone"] = {{"equalityLabels", cone.eq_labels}, {"activeLabels", cone.act_labels}};

    tangent::AbadieParams ap;
    ap.nbhd.radius = opt.radius;
    ap.nbhd.samples = opt.samples;
    ap.seed = opt.seed;
    ap.corrector.seed = opt.seed;
    ap.corrector.tol_act = opt.tol_act;
    ap.corrector.tol_rank = opt.tol_rank;
    tangent::AbadieReport rep = tangent::abadie_check(sys, point, ap);
    out["rcrcqPlus"] = cq_report_json(rep.rcrcq);
    out["abadie"] = abadie_json(rep);

    if (sys.objective()) {
        kkt::MultiplierResult m = kkt::lagrange_multipliers(sys, point, opt.tol_res, opt.tol_act);
        out["multipliers"] = multipliers_json(m);
        kkt::ClosednessNote cn = kkt::multiplier_set_closedness_note(sys, point, opt.tol_act,
                                                                     opt.tol_rank);
        out["closedness"] = {{"generators", cn.generators},
                             {"generatorRank", cn.generator_rank},
                             {"justification", cn.justification}};
    }
    return out;
}

json run_tangent(const ProblemDocument& doc, const std::string& input_path,
                 const Eigen::VectorXd& point, const std::optional<std::string>& point_name,
                 const Eigen::VectorXd& direction, const TangentOptions& opt) {
    ConstraintSystem sys = ConstraintSystem::realize(doc, opt.truncation);
    tangent::CorrectorParams params;
    params.seed = opt.seed;
    params.tol_act = opt.tol_act;
    params.tol_rank = opt.tol_rank;

    json out = header_json();
    out["input"] = input_json(input_path, opt.truncation, point, point_name);
    out["input"]["direction"] = vec_json(direction);
    out["parameters"] = {{"seed", opt.seed},
                         {"tolActive", opt.tol_act},
                         {"tolRank", opt.tol_rank},
                         {"grid", {{"t0", params.t0}, {"factor", params.factor}, {"levels", params.levels}}},
                         {"tolRatio", params.tol_ratio},
                         {"tolFeasibility", params.tol_feas}};

    tangent::TangencyCertificate cert = tangent::tangency_test(sys, point, direction, params);
    out["certificate"] = certificate_json(cert);
    tangent::H1Verdict h1 = tangent::h1_check(sys, point, direction, 1e-6, 1e-6, params);
    out["h1"] = h1_json(h1);
    if (opt.with_oracle) {
        tangent::OracleParams op;
        op.seed = opt.seed;
        out["oracle"] = oracle_json(tangent::brute_force_tangent_oracle(sys, point, direction, op));
    }
    return out;
}

json run_kkt(const ProblemDocument& doc, const std::string& input_path,
             const Eigen::VectorXd& point, const std::optional<std::string>& point_name,
             const KktOptions& opt) {
    ConstraintSystem sys = ConstraintSystem::realize(doc, opt.truncation);
    json out = header_json();
    out["input"] = input_json(input_path, opt.truncation, point, point_name);
    out["parameters"] = {{"tolActive", opt.tol_act}, {"tolResidual", opt.tol_res}};

    kkt::NormalConePattern pat = kkt::normal_cone_pattern(sys, point, opt.tol_act);
    out["pattern"] = {{"zero", pat.zero_labels},
                      {"nonneg", pat.nonneg_labels},
                      {"free", pat.free_labels}};
    kkt::MultiplierResult m = kkt::lagrange_multipliers(sys, point, opt.tol_res, opt.tol_act);
    out["multipliers"] = multipliers_json(m);
    kkt::ClosednessNote cn = kkt::multiplier_set_closedness_note(sys, point, opt.tol_act);
    out["closedness"] = {{"generators", cn.generators},
                         {"generatorRank", cn.generator_rank},
                         {"justification", cn.justification}};
    return out;
}

std::string render_json(const json& j) { return j.dump(2) + "\n"; }

void write_json_atomic(const json& j, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp + " for writing");
        os << render_json(j);
        if (!os.flush()) throw IoError("short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw IoError("cannot move " + tmp + " into place");
    }
}

}  // namespace cqa::report
