#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hoif/model.hpp"
#include "hoif/simulate.hpp"

namespace hoif {

// Text formats. All numbers are written with 17 significant digits, so a
// fixed seed reproduces files byte for byte.

std::string format_g17(double v);

// Result table: header
//   estimator,n,k,mean,bias,variance,rmse,replications,seed
// with rows sorted by (estimator, n, k).
void write_result_table(std::ostream& os, const ResultTable& table);
void write_result_table_file(const std::string& path, const ResultTable& table);
ResultTable read_result_table_file(const std::string& path);

// Dataset: one comment line documenting the y1 = Y*A convention, then the
// header y1,y2,a,z1..zd; the y2 column is left blank for models without a
// second outcome.
struct Dataset {
    bool has_y2 = false;
    int d = 1;
    std::vector<Observation> observations;
};

void write_dataset(std::ostream& os, const Dataset& data);
void write_dataset_file(const std::string& path, const Dataset& data);
Dataset read_dataset_file(const std::string& path);

} // namespace hoif
