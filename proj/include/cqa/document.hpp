#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cqa/errors.hpp"

namespace cqa {

// An indexed family of constraints g_base, g_base+1, ... defined by one
// expression of x and the index symbol. `hi` empty means unbounded above.
struct FamilyDecl {
    int base = 0;
    long lo = 0;
    std::optional<long> hi;
    std::string source;
    std::map<std::string, std::string> coefficients;  // name -> expression of the index
    std::optional<double> tail_bound;                 // negative when present
};

// Either a single labeled constraint or a family.
struct EntryDecl {
    std::optional<int> label;  // scalar form
    std::string source;        // scalar expression text
    std::optional<FamilyDecl> family;
    bool is_family() const { return family.has_value(); }
};

struct ProblemDocument {
    std::string version = "1";
    int n = 0;
    std::string index_symbol = "i";
    std::vector<EntryDecl> equalities;
    std::vector<EntryDecl> inequalities;
    std::optional<std::string> objective;
    std::map<std::string, Eigen::VectorXd> points;

    // Structural checks that do not need a truncation level: label ranges
    // cannot collide at any truncation, ranges are nonempty, declared tail
    // bounds are negative. Throws ValidationError.
    void validate_structure() const;
};

// Decode a document from JSON text. Throws IoError on malformed JSON and
// ValidationError on schema violations.
ProblemDocument document_from_json_text(const std::string& text);

// Read and decode a document file. Throws IoError when the file cannot be
// read or is not valid JSON.
ProblemDocument load_document(const std::string& path);

}  // namespace cqa
