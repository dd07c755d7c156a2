#include "rdsg/io.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>

#include "rdsg/error.hpp"

namespace rdsg {

namespace {

std::string real(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        const auto b = s.find_first_not_of(' ');
        const auto e = s.find_last_not_of(' ');
        s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    }
    return out;
}

}  // namespace

void write_iterations_csv(std::ostream& out, const std::vector<IterationRecord>& history)
{
    std::string s = "iter,dofs,tt_dofs,eta,zeta,iota,theta,refined\n";
    for (const auto& r : history) {
        s += std::to_string(r.iter) + ',' + std::to_string(r.dofs) + ',' + std::to_string(r.tt_dofs) + ',' +
             real(r.report.eta) + ',' + real(r.report.zeta) + ',' + real(r.report.iota) + ',' +
             real(r.report.theta) + ',' + to_string(r.refined) + '\n';
    }
    out << s;
}

void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow>& rows)
{
    std::string s = "dofs,tt_dofs,e_E,e_V,theta\n";
    for (const auto& r : rows)
        s += std::to_string(r.dofs) + ',' + std::to_string(r.tt_dofs) + ',' + real(r.e_E) + ',' + real(r.e_V) + ',' +
             real(r.theta) + '\n';
    out << s;
}

bool CsvTable::has(const std::string& name) const
{
    return std::find(header.begin(), header.end(), name) != header.end();
}

std::vector<double> CsvTable::column(const std::string& name) const
{
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("csv: no column '" + name + "'");
    const std::size_t j = static_cast<std::size_t>(it - header.begin());
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::string& v = rows[i][j];
        std::size_t pos = 0;
        double x = 0.0;
        try {
            x = std::stod(v, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != v.size())
            throw ConfigError("csv: row " + std::to_string(i + 2) + ", column '" + name + "': not a number");
        out.push_back(x);
    }
    return out;
}

CsvTable read_csv(std::istream& in, const std::string& source)
{
    CsvTable t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fields = split(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size())
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                              " fields, got " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
    }
    if (t.header.empty()) throw ConfigError(source + ": empty table");
    return t;
}

}  // namespace rdsg
