#include <charconv>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Dense>

#include "cqa/document.hpp"
#include "cqa/errors.hpp"
#include "cqa/problem.hpp"
#include "cqa/report.hpp"

namespace {

struct PointArg {
    Eigen::VectorXd value;
    std::optional<std::string> name;
};

std::optional<double> parse_number(const std::string& tok) {
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first && (*(last - 1) == ' ' || *(last - 1) == '\t')) --last;
    double v = 0;
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || p != last || first == last) return std::nullopt;
    return v;
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = s.find(',', start);
        out.push_back(s.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

PointArg resolve_point(const std::string& arg, const cqa::ProblemDocument& doc) {
    std::vector<std::string> toks = split_commas(arg);
    std::vector<double> vals;
    bool numeric = true;
    for (const std::string& t : toks) {
        if (auto v = parse_number(t))
            vals.push_back(*v);
        else
            numeric = false;
    }
    PointArg out;
    if (numeric && !vals.empty()) {
        out.value = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
        return out;
    }
    if (toks.size() == 1) {
        auto it = doc.points.find(arg);
        if (it != doc.points.end()) {
            out.value = it->second;
            out.name = arg;
            return out;
        }
        throw cqa::ValidationError("point '" + arg + "' is neither numeric nor a declared point");
    }
    throw cqa::ValidationError("cannot parse point '" + arg + "'");
}

Eigen::VectorXd resolve_direction(const std::string& arg) {
    std::vector<std::string> toks = split_commas(arg);
    Eigen::VectorXd d(static_cast<Eigen::Index>(toks.size()));
    for (std::size_t k = 0; k < toks.size(); ++k) {
        auto v = parse_number(toks[k]);
        if (!v) throw cqa::ValidationError("cannot parse direction component '" + toks[k] + "'");
        d[static_cast<Eigen::Index>(k)] = *v;
    }
    if (d.norm() == 0) throw cqa::ValidationError("direction must be nonzero");
    return d;
}

std::uint64_t env_seed_default() {
    if (const char* s = std::getenv("CQA_SEED")) {
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(s, s + std::string(s).size(), v);
        if (ec == std::errc() && *p == '\0') return v;
    }
    return 42;
}

void emit(const nlohmann::json& j, const std::string& json_path) {
    if (!json_path.empty()) cqa::report::write_json_atomic(j, json_path);
}

int run(int argc, char** argv) {
    CLI::App app{"constraint qualification analyzer"};
    app.require_subcommand(1);

    std::string file, point_arg, dir_arg, json_path;
    long truncate = 8;
    double radius = 0.1, tol_act = 1e-8, tol_rank = 1e-8;
    int samples = 32;
    std::uint64_t seed = env_seed_default();
    bool with_oracle = false;

    CLI::App* validate = app.add_subcommand("validate", "check a problem document");
    validate->add_option("file", file, "problem document")->required();
    validate->add_option("--truncate", truncate, "family truncation level");

    CLI::App* analyze = app.add_subcommand("analyze", "full analysis at a point");
    analyze->add_option("file", file, "problem document")->required();
    analyze->add_option("--point", point_arg, "coordinates 'a,b,...' or a declared point name")
        ->required();
    analyze->add_option("--truncate", truncate, "family truncation level");
    analyze->add_option("--radius", radius, "neighborhood radius");
    analyze->add_option("--samples", samples, "neighborhood samples");
    analyze->add_option("--seed", seed, "random seed");
    analyze->add_option("--tol-active", tol_act, "activity tolerance");
    analyze->add_option("--tol-rank", tol_rank, "rank tolerance");
    analyze->add_option("--json", json_path, "write the full report here");

    CLI::App* tangentc = app.add_subcommand("tangent", "tangency certificate for a direction");
    tangentc->add_option("file", file, "problem document")->required();
    tangentc->add_option("--point", point_arg, "coordinates or a declared point name")->required();
    tangentc->add_option("--direction", dir_arg, "direction 'a,b,...'")->required();
    tangentc->add_option("--truncate", truncate, "family truncation level");
    tangentc->add_option("--seed", seed, "random seed");
    tangentc->add_option("--tol-active", tol_act, "activity tolerance");
    tangentc->add_flag("--oracle", with_oracle, "cross-check with the sampling oracle");
    tangentc->add_option("--json", json_path, "write the full report here");

    CLI::App* kktc = app.add_subcommand("kkt", "multipliers and normal cone pattern");
    kktc->add_option("file", file, "problem document")->required();
    kktc->add_option("--point", point_arg, "coordinates or a declared point name")->required();
    kktc->add_option("--truncate", truncate, "family truncation level");
    kktc->add_option("--tol-active", tol_act, "activity tolerance");
    kktc->add_option("--json", json_path, "write the full report here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    cqa::ProblemDocument doc = cqa::load_document(file);

    if (validate->parsed()) {
        long n_check = truncate;
        for (const cqa::EntryDecl& e : doc.equalities)
            if (e.family) n_check = std::max(n_check, e.family->lo);
        for (const cqa::EntryDecl& e : doc.inequalities)
            if (e.family) n_check = std::max(n_check, e.family->lo);
        cqa::ConstraintSystem sys = cqa::ConstraintSystem::realize(doc, n_check);
        std::cout << "ok: n=" << doc.n << ", " << sys.constraints().size()
                  << " constraints realized at N=" << n_check << "\n";
        return 0;
    }

    PointArg pt = resolve_point(point_arg, doc);

    if (analyze->parsed()) {
        cqa::report::AnalyzeOptions opt;
        opt.truncation = truncate;
        opt.radius = radius;
        opt.samples = samples;
        opt.seed = seed;
        opt.tol_act = tol_act;
        opt.tol_rank = tol_rank;
        nlohmann::json j = cqa::report::run_analysis(doc, file, pt.value, pt.name, opt);
        emit(j, json_path);
        std::cout << "feasible: " << (j["activeSet"]["feasible"].get<bool>() ? "yes" : "no")
                  << "\nactive: " << j["activeSet"]["active"].dump()
                  << "\nrcrcq+: " << j["rcrcqPlus"]["overall"].get<std::string>()
                  << " failing " << j["rcrcqPlus"]["failing"].dump()
                  << "\nabadie: " << j["abadie"]["verdict"].get<std::string>();
        if (j["abadie"].contains("witness"))
            std::cout << " witness " << j["abadie"]["witness"].dump();
        std::cout << "\n";
        if (j.contains("multipliers"))
            std::cout << "kkt: " << (j["multipliers"]["kkt"].get<bool>() ? "yes" : "no")
                      << " residual " << j["multipliers"]["residual"].get<double>()
                      << " lambda " << j["multipliers"]["lambda"].dump() << "\n";
        return 0;
    }

    if (tangentc->parsed()) {
        Eigen::VectorXd d = resolve_direction(dir_arg);
        cqa::report::TangentOptions opt;
        opt.truncation = truncate;
        opt.seed = seed;
        opt.tol_act = tol_act;
        opt.with_oracle = with_oracle;
        nlohmann::json j = cqa::report::run_tangent(doc, file, pt.value, pt.name, d, opt);
        emit(j, json_path);
        std::cout << "tangency: " << j["certificate"]["verdict"].get<std::string>()
                  << "\nh1: " << j["h1"]["verdict"].get<std::string>() << "\n";
        if (j.contains("oracle"))
            std::cout << "oracle: " << j["oracle"]["outcome"].get<std::string>() << "\n";
        return 0;
    }

    cqa::report::KktOptions opt;
    opt.truncation = truncate;
    opt.tol_act = tol_act;
    nlohmann::json j = cqa::report::run_kkt(doc, file, pt.value, pt.name, opt);
    emit(j, json_path);
    std::cout << "kkt: " << (j["multipliers"]["kkt"].get<bool>() ? "yes" : "no") << " residual "
              << j["multipliers"]["residual"].get<double>() << "\nlambda: "
              << j["multipliers"]["lambda"].dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const cqa::FeasibilityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const cqa::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const cqa::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
