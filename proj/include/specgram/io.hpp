#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "specgram/profile.hpp"

namespace specgram {

// %.12g rendering used for every number the tools write, so reruns with the
// same configuration are byte-identical.
std::string fmt_g(double x);

// FNV-1a hash of a canonical configuration string (stamped into output
// metadata so results can be traced to their exact configuration).
std::uint64_t fnv1a64(const std::string& text);

using Metadata = std::vector<std::pair<std::string, std::string>>;

// CSV with "# key: value" metadata lines on top; readers skip '#' lines.
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& M, const Metadata& meta);
void write_vector_csv(const std::string& path, const Eigen::VectorXd& v, const Metadata& meta);
Eigen::MatrixXd read_matrix_csv(const std::string& path);

// Profile files: a bare CSV is a dense sigma2 matrix; JSON selects the
// construction with {"type": "constant" | "separable" | "dense"}.
//   constant:  {"type": "constant", "p": 100, "n": 200, "value": 1.0}
//   separable: {"type": "separable", "d": [...], "d_tilde": [...]}
//   dense:     {"type": "dense", "sigma2": [[...], ...]}  or
//              {"type": "dense", "csv": "relative/path.csv"}
VarianceProfile load_profile(const std::string& path);
VarianceProfile load_profile_json(const std::string& path);

}  // namespace specgram
