#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "chiral/shell/config.hpp"

namespace chiral::shell {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

class OutputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One CSV row under construction: `table.add(Row() << j << f << sigma)`.
class Row {
public:
    Row& operator<<(double v);
    Row& operator<<(int v);
    Row& operator<<(long long v);
    Row& operator<<(std::uint64_t v);
    Row& operator<<(const std::string& v);
    Row& operator<<(const char* v) { return *this << std::string(v); }
    /// Complex values take two columns, real then imaginary.
    Row& operator<<(std::complex<double> v);

    const std::vector<std::string>& cells() const { return cells_; }

private:
    std::vector<std::string> cells_;
};

/// Rectangular table written as CSV. Cells are stored already formatted.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    /// Throws OutputError if the row width differs from the header.
    void add(const Row& row);
    const std::vector<std::string>& header() const { return header_; }
    std::size_t size() const { return rows_.size(); }
    const std::vector<std::string>& at(std::size_t i) const { return rows_[i]; }
    std::string str() const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// RFC 4180 quoting: fields holding a comma, quote, CR or LF are quoted with doubled quotes.
std::string csv_field(const std::string& s);

/// SHA-1 of "blob <size>\0<content>", as git hashes file contents (40 hex digits).
std::string git_blob_hash(const std::string& content);

/// Writes tables and a JSON manifest for one run. File names are deterministic:
/// <subcommand>-<hash12>[-<table>].csv and <subcommand>-<hash12>.json.
class RunWriter {
public:
    RunWriter(const RunConfig& cfg, std::string subcommand);

    const std::string& config_hash() const { return hash_; }
    std::filesystem::path directory() const { return dir_; }

    void add_table(const std::string& name, const CsvTable& table);
    nlohmann::json& summary() { return summary_; }
    void set_classification(const std::string& c) { classification_ = c; }
    void set_dt(double dt) { dt_ = dt; }
    nlohmann::json manifest(double wall_seconds) const;
    /// Writes the manifest and returns its path.
    std::filesystem::path finish(double wall_seconds);

private:
    const RunConfig& cfg_;
    std::string subcommand_;
    std::string hash_;
    std::filesystem::path dir_;
    std::vector<std::string> outputs_;
    nlohmann::json summary_ = nlohmann::json::object();
    std::string classification_;
    double dt_ = 0.0;
};

}  // namespace chiral::shell
