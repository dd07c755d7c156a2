#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rdsg/adaptive.hpp"

namespace rdsg {

/// Columns iter, dofs, tt_dofs, eta, zeta, iota, theta, refined; reals printed with 17 digits.
void write_iterations_csv(std::ostream& out, const std::vector<IterationRecord>& history);
/// Columns dofs, tt_dofs, e_E, e_V, theta.
void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow>& rows);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    bool has(const std::string& name) const;
    /// Numeric values of a named column; throws ConfigError if absent or malformed.
    std::vector<double> column(const std::string& name) const;
};

/// Comma-separated table with a header row; blank lines are skipped.
CsvTable read_csv(std::istream& in, const std::string& source = "csv");

}  // namespace rdsg
