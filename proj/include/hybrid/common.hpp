#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace hybrid {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Bad inputs: malformed data files, inconsistent configs, invalid requests.
// CLI maps this to exit code 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical breakdown: rank-deficient designs, singular sandwiches, or too
// many failed replications. CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// FNV-1a, used for config/spec digests echoed into fit results.
inline std::string digest64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace hybrid
