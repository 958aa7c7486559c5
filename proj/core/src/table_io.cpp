#include "hoif/table_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hoif/errors.hpp"

namespace hoif {

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_result_table(std::ostream& os, const ResultTable& table) {
    std::vector<ResultRow> rows = table.rows;
    std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        if (a.estimator != b.estimator) return a.estimator < b.estimator;
        if (a.n != b.n) return a.n < b.n;
        return a.k < b.k;
    });
    os << "estimator,n,k,mean,bias,variance,rmse,replications,seed\n";
    for (const ResultRow& r : rows) {
        os << r.estimator << ',' << r.n << ',' << r.k << ',' << format_g17(r.mean) << ','
           << format_g17(r.bias) << ',' << format_g17(r.variance) << ',' << format_g17(r.rmse)
           << ',' << r.replications << ',' << r.seed << '\n';
    }
}

void write_result_table_file(const std::string& path, const ResultTable& table) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open output file: " + path);
    write_result_table(os, table);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(field);
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    out.push_back(field);
    return out;
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("malformed number in " + what + ": '" + s + "'");
    }
}

long parse_long(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("malformed integer in " + what + ": '" + s + "'");
    }
}

} // namespace

ResultTable read_result_table_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open result table: " + path);
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("result table is empty: " + path);
    if (line != "estimator,n,k,mean,bias,variance,rmse,replications,seed")
        throw ConfigError("result table has an unexpected header: " + path);
    ResultTable table;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 9) throw ConfigError("result table row has wrong field count: " + line);
        ResultRow row;
        row.estimator = f[0];
        row.n = static_cast<int>(parse_long(f[1], "n"));
        row.k = static_cast<int>(parse_long(f[2], "k"));
        row.mean = parse_double(f[3], "mean");
        row.bias = parse_double(f[4], "bias");
        row.variance = parse_double(f[5], "variance");
        row.rmse = parse_double(f[6], "rmse");
        row.replications = static_cast<int>(parse_long(f[7], "replications"));
        row.seed = static_cast<std::uint64_t>(parse_long(f[8], "seed"));
        table.rows.push_back(std::move(row));
    }
    return table;
}

void write_dataset(std::ostream& os, const Dataset& data) {
    os << "# missing-data convention: y1 = Y*A, so y1 = 0 whenever a = 0; "
          "y2 is blank unless the model has a second outcome\n";
    os << "y1,y2,a";
    for (int i = 1; i <= data.d; ++i) os << ",z" << i;
    os << '\n';
    for (const Observation& obs : data.observations) {
        os << format_g17(obs.y1) << ',';
        if (data.has_y2) os << format_g17(obs.y2);
        os << ',' << format_g17(obs.a);
        for (int i = 0; i < data.d; ++i) os << ',' << format_g17(obs.z.point[i]);
        os << '\n';
    }
}

void write_dataset_file(const std::string& path, const Dataset& data) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open output file: " + path);
    write_dataset(os, data);
}

Dataset read_dataset_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open dataset: " + path);
    std::string line;
    // skip comment lines
    do {
        if (!std::getline(is, line)) throw ConfigError("dataset is empty: " + path);
    } while (!line.empty() && line[0] == '#');

    const auto header = split_csv(line);
    if (header.size() < 4 || header[0] != "y1" || header[1] != "y2" || header[2] != "a")
        throw ConfigError("dataset header must start with y1,y2,a: " + path);
    const int d = static_cast<int>(header.size()) - 3;
    for (int i = 0; i < d; ++i)
        if (header[static_cast<std::size_t>(3 + i)] != "z" + std::to_string(i + 1))
            throw ConfigError("dataset header: expected column z" + std::to_string(i + 1));

    Dataset data;
    data.d = d;
    bool any_y2 = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto f = split_csv(line);
        if (f.size() != header.size())
            throw ConfigError("dataset row has wrong field count: " + line);
        Observation obs;
        obs.y1 = parse_double(f[0], "y1");
        if (!f[1].empty()) {
            obs.y2 = parse_double(f[1], "y2");
            any_y2 = true;
        }
        obs.a = parse_double(f[2], "a");
        Eigen::VectorXd z(d);
        for (int i = 0; i < d; ++i) z[i] = parse_double(f[static_cast<std::size_t>(3 + i)], "z");
        obs.z = Covariate::continuous(std::move(z));
        data.observations.push_back(std::move(obs));
    }
    data.has_y2 = any_y2;
    return data;
}

} // namespace hoif
