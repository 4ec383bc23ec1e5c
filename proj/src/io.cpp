#include "sieve/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace sieve {

int CsvTable::col(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
    std::ifstream is(path);
    require(bool(is), "read_csv: cannot open " + path);
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;  // version/comment lines
        auto cells = split_csv_line(line);
        if (first) {
            t.header = cells;
            first = false;
        } else {
            require(cells.size() == t.header.size(), "read_csv: ragged row in " + path);
            t.rows.push_back(cells);
        }
    }
    require(!first, "read_csv: missing header in " + path);
    return t;
}

void write_csv(const std::string& path, const CsvTable& t) {
    std::ostringstream os;
    os << "# sievenet-csv 1\n";
    for (size_t i = 0; i < t.header.size(); ++i) {
        os << (i ? "," : "") << t.header[i];
    }
    os << "\n";
    for (const auto& row : t.rows) {
        for (size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
        os << "\n";
    }
    atomic_write(path, os.str());
}

std::string Config::get(const std::string& k, const std::string& def) const {
    auto it = kv.find(k);
    return it == kv.end() ? def : it->second;
}

double Config::num(const std::string& k, double def) const {
    auto it = kv.find(k);
    if (it == kv.end()) return def;
    if (it->second == "inf") return kPosInf;
    if (it->second == "-inf") return kNegInf;
    return std::stod(it->second);
}

int Config::integer(const std::string& k, int def) const {
    auto it = kv.find(k);
    return it == kv.end() ? def : std::stoi(it->second);
}

std::vector<std::string> Config::str_list(const std::string& k) const {
    std::vector<std::string> out;
    auto it = kv.find(k);
    if (it == kv.end()) return out;
    std::string cur;
    for (char ch : it->second + ",") {
        if (ch == ',' || ch == ' ') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    return out;
}

std::vector<double> Config::num_list(const std::string& k) const {
    std::vector<double> out;
    for (const auto& s : str_list(k)) out.push_back(std::stod(s));
    return out;
}

std::vector<int> Config::int_list(const std::string& k) const {
    std::vector<int> out;
    for (const auto& s : str_list(k)) out.push_back(std::stoi(s));
    return out;
}

Config load_config(const std::string& path) {
    std::ifstream is(path);
    require(bool(is), "load_config: cannot open " + path);
    std::ostringstream raw;
    raw << is.rdbuf();
    Config c;
    c.raw = raw.str();
    std::istringstream ss(c.raw);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        // trim
        auto l = line.find_first_not_of(" \t\r");
        if (l == std::string::npos) continue;
        auto r = line.find_last_not_of(" \t\r");
        line = line.substr(l, r - l + 1);
        const auto eq = line.find('=');
        require(eq != std::string::npos,
                "load_config: line " + std::to_string(lineno) + " is not key = value");
        auto key = line.substr(0, eq);
        auto val = line.substr(eq + 1);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        c.kv[trim(key)] = trim(val);
    }
    return c;
}

Dataset dataset_from_csv(const CsvTable& t, const std::vector<std::string>& x_cols,
                         const std::vector<std::string>& y_cols,
                         const std::string& label_col,
                         const std::vector<std::string>& price_cols) {
    Dataset d;
    std::vector<int> xi, yi, pi;
    for (const auto& c : x_cols) {
        const int i = t.col(c);
        require(i >= 0, "dataset: missing x column " + c);
        xi.push_back(i);
    }
    for (const auto& c : y_cols) {
        const int i = t.col(c);
        require(i >= 0, "dataset: missing y column " + c);
        yi.push_back(i);
    }
    for (const auto& c : price_cols) {
        const int i = t.col(c);
        require(i >= 0, "dataset: missing price column " + c);
        pi.push_back(i);
    }
    int li = -1;
    if (!label_col.empty()) {
        li = t.col(label_col);
        require(li >= 0, "dataset: missing label column " + label_col);
    }
    for (const auto& row : t.rows) {
        std::vector<double> x;
        for (int i : xi) x.push_back(std::stod(row[i]));
        d.x.push_back(std::move(x));
        if (li >= 0) {
            d.label.push_back(std::stoi(row[li]));
        } else {
            std::vector<double> y;
            for (int i : yi) y.push_back(std::stod(row[i]));
            d.y.push_back(std::move(y));
        }
        if (!pi.empty()) {
            std::vector<double> p;
            for (int i : pi) p.push_back(std::stod(row[i]));
            d.price.push_back(std::move(p));
        }
    }
    d.check();
    return d;
}

CsvTable dataset_to_csv(const Dataset& d) {
    CsvTable t;
    const int K = d.x.empty() ? 0 : static_cast<int>(d.x.front().size());
    for (int k = 0; k < K; ++k) t.header.push_back("x" + std::to_string(k + 1));
    if (d.is_choice()) {
        t.header.push_back("label");
    } else {
        const int M = d.y.empty() ? 0 : static_cast<int>(d.y.front().size());
        for (int m = 0; m < M; ++m) t.header.push_back("y" + std::to_string(m + 1));
    }
    for (int i = 0; i < d.n(); ++i) {
        std::vector<std::string> row;
        for (double v : d.x[i]) row.push_back(format_g17(v));
        if (d.is_choice()) {
            row.push_back(std::to_string(d.label[i]));
        } else {
            for (double v : d.y[i]) row.push_back(format_g17(v));
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        require(bool(os), "atomic_write: cannot open " + tmp);
        os << content;
        require(bool(os), "atomic_write: short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace sieve
