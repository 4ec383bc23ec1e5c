#ifndef SIEVE_IO_HPP
#define SIEVE_IO_HPP

#include <map>
#include <string>
#include <vector>

#include "sieve/train.hpp"

namespace sieve {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int col(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& t);

// version-tagged key = value config files; '#' starts a comment
struct Config {
    std::map<std::string, std::string> kv;
    std::string raw;  // verbatim file content, echoed into artifacts

    bool has(const std::string& k) const { return kv.count(k) > 0; }
    std::string get(const std::string& k, const std::string& def = "") const;
    double num(const std::string& k, double def) const;
    int integer(const std::string& k, int def) const;
    std::vector<double> num_list(const std::string& k) const;
    std::vector<int> int_list(const std::string& k) const;
    std::vector<std::string> str_list(const std::string& k) const;
};

Config load_config(const std::string& path);

// Column roles come from the config, never inferred: x_cols, y_cols,
// label_col, price_cols.
Dataset dataset_from_csv(const CsvTable& t, const std::vector<std::string>& x_cols,
                         const std::vector<std::string>& y_cols,
                         const std::string& label_col,
                         const std::vector<std::string>& price_cols);

CsvTable dataset_to_csv(const Dataset& d);

// temp-then-rename write; no partial artifacts on failure
void atomic_write(const std::string& path, const std::string& content);

std::string format_g17(double x);

}  // namespace sieve

#endif
