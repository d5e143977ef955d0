#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "cqa/document.hpp"

namespace cqa::report {

inline constexpr const char* kToolName = "cqa";
inline constexpr const char* kToolVersion = "0.1.0";

struct AnalyzeOptions {
    long truncation = 8;
    double radius = 0.1;
    int samples = 32;
    std::uint64_t seed = 42;
    double tol_act = 1e-8;
    double tol_rank = 1e-8;
    double tol_res = 1e-8;
};

// Full pipeline at a point: active set, linearized cone, constant-rank check
// over active subsets, tangent = linearized cone test, and multipliers when
// the document has an objective. Self-contained for replay: the output embeds
// the input path, the point, the truncation, and every parameter and seed.
nlohmann::json run_analysis(const ProblemDocument& doc, const std::string& input_path,
                            const Eigen::VectorXd& point,
                            const std::optional<std::string>& point_name,
                            const AnalyzeOptions& opt);

struct TangentOptions {
    long truncation = 8;
    std::uint64_t seed = 42;
    double tol_act = 1e-8;
    double tol_rank = 1e-8;
    bool with_oracle = false;
};

// Tangency certificate and feasibility-hypothesis check for one direction,
// optionally cross-checked against the sampling oracle.
nlohmann::json run_tangent(const ProblemDocument& doc, const std::string& input_path,
                           const Eigen::VectorXd& point,
                           const std::optional<std::string>& point_name,
                           const Eigen::VectorXd& direction, const TangentOptions& opt);

struct KktOptions {
    long truncation = 8;
    double tol_act = 1e-8;
    double tol_res = 1e-8;
};

// Normal cone pattern, multipliers, stationarity residual, and the
// closedness note for the multiplier set.
nlohmann::json run_kkt(const ProblemDocument& doc, const std::string& input_path,
                       const Eigen::VectorXd& point,
                       const std::optional<std::string>& point_name, const KktOptions& opt);

// Stable rendering (2-space indent, sorted keys, shortest round-trip doubles).
std::string render_json(const nlohmann::json& j);

// Writes via a temporary file in the target directory plus rename.
void write_json_atomic(const nlohmann::json& j, const std::string& path);

}  // namespace cqa::report
