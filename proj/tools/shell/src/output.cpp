#include "chiral/shell/output.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace chiral::shell {

Row& Row::operator<<(double v) {
    cells_.push_back(format_double(v));
    return *this;
}
Row& Row::operator<<(int v) {
    cells_.push_back(std::to_string(v));
    return *this;
}
Row& Row::operator<<(long long v) {
    cells_.push_back(std::to_string(v));
    return *this;
}
Row& Row::operator<<(std::uint64_t v) {
    cells_.push_back(std::to_string(v));
    return *this;
}
Row& Row::operator<<(const std::string& v) {
    cells_.push_back(v);
    return *this;
}
Row& Row::operator<<(std::complex<double> v) {
    cells_.push_back(format_double(v.real()));
    cells_.push_back(format_double(v.imag()));
    return *this;
}

void CsvTable::add(const Row& row) {
    if (row.cells().size() != header_.size())
        throw OutputError("csv row has " + std::to_string(row.cells().size()) +
                          " cells, header has " + std::to_string(header_.size()));
    rows_.push_back(row.cells());
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string CsvTable::str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += csv_field(cells[i]);
        }
        out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
}

std::string git_blob_hash(const std::string& content) {
    const std::string blob = "blob " + std::to_string(content.size()) + '\0' + content;
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr) != 1)
        throw OutputError("SHA-1 digest failed");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

namespace {

// Keys that only say where or how fast to run, not what is computed.
bool affects_results(const std::string& key) { return key != "output_dir" && key != "workers"; }

void write_file(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw OutputError("cannot open '" + path.string() + "' for writing");
    out << body;
    out.close();
    if (!out) throw OutputError("failed writing '" + path.string() + "'");
}

}  // namespace

RunWriter::RunWriter(const RunConfig& cfg, std::string subcommand)
    : cfg_(cfg), subcommand_(std::move(subcommand)), dir_(cfg.output_dir) {
    std::string canonical = subcommand_ + "\n";
    for (const std::string& key : config_keys())
        if (affects_results(key)) canonical += key + " = " + get_value(cfg, key) + "\n";
    hash_ = git_blob_hash(canonical);
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw OutputError("cannot create '" + dir_.string() + "': " + ec.message());
}

void RunWriter::add_table(const std::string& name, const CsvTable& table) {
    std::string file = subcommand_ + "-" + hash_.substr(0, 12);
    if (!name.empty()) file += "-" + name;
    file += ".csv";
    write_file(dir_ / file, table.str());
    outputs_.push_back(file);
}

nlohmann::json RunWriter::manifest(double wall_seconds) const {
    using nlohmann::json;
    json config = json::object();
    for (const std::string& key : config_keys()) config[key] = get_value(cfg_, key);
    json overrides = json::array();
    for (const auto& o : cfg_.overrides)
        overrides.push_back({{"key", o.key}, {"file", o.file_value}, {"flag", o.flag_value}});
    const PhysicalParams p = cfg_.physical_params();
    json m;
    m["schema_version"] = kSchemaVersion;
    m["tool"] = "chiralsim";
    m["tool_version"] = kToolVersion;
    m["subcommand"] = subcommand_;
    m["config_hash"] = hash_;
    m["seed"] = cfg_.seed;
    m["dt"] = dt_;
    m["integrator"] = "rk4";
    m["config_file"] = cfg_.config_path.empty() ? json(nullptr) : json(cfg_.config_path);
    m["config"] = config;
    m["overrides"] = overrides;
    m["resolved"] = {{"n_atoms", p.n_atoms},     {"gamma_1d_frac", p.gamma_1d_frac},
                     {"chi_r", p.chi_r},         {"delta", p.delta},
                     {"omega", p.rabi()},        {"gamma_p", p.gamma_p},
                     {"omega_r", p.omega_r},     {"probe_gamma", p.probe_gamma()},
                     {"probe_loss", p.probe_loss()}};
    if (!classification_.empty()) m["classification"] = classification_;
    m["summary"] = summary_;
    m["outputs"] = outputs_;
    m["timing"] = {{"wall_seconds", wall_seconds}};
    return m;
}

std::filesystem::path RunWriter::finish(double wall_seconds) {
    const std::filesystem::path path = dir_ / (subcommand_ + "-" + hash_.substr(0, 12) + ".json");
    write_file(path, manifest(wall_seconds).dump(2) + "\n");
    return path;
}

}  // namespace chiral::shell
