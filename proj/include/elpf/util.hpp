#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace elpf {

/// Base of every exception the library throws.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Bad user input: malformed files, inconsistent dimensions, invalid configs.
class InputError : public Error {
  public:
    using Error::Error;
};

/// A numerical procedure failed to reach its tolerance.
class ConvergenceError : public Error {
  public:
    using Error::Error;
};

/// Deterministic random stream. Substreams are derived from (seed, a, b) with
/// splitmix64 so every sample owns an independent, reproducible generator
/// regardless of which worker runs it.
class Rng {
  public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t substream = 0);

    std::uint64_t next() { return engine_(); }
    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer on [0, bound), unbiased.
    std::uint64_t below(std::uint64_t bound);

  private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Runs body(i) for i in [0, count) on up to `jobs` threads. Exceptions from
/// any worker are rethrown on the caller after all workers finish.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

/// Shortest round-trippable decimal form of a double.
std::string format_double(double v);

/// CSV with a header row; values written with format_double.
std::string matrix_to_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& header);
Eigen::MatrixXd matrix_from_csv(std::string_view text, std::vector<std::string>* header = nullptr);

std::vector<std::string> split_csv_line(std::string_view line);

double median(std::vector<double> values);

}  // namespace elpf
