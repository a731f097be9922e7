#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ugt {

// Error hierarchy mapped to CLI exit codes: config 2, data 3, numeric 4.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Deterministic RNG. Wraps mt19937_64 but derives doubles and bounded ints
/// itself so streams do not depend on libstdc++ distribution internals.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(split_mix(seed)) {}

    std::uint64_t next_u64();
    /// Uniform in [0, 1).
    double uniform();
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);
    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n);
    /// Standard normal via Box-Muller.
    double normal();
    /// Derive an independent child stream (e.g. per epoch, per split).
    Rng fork(std::uint64_t stream) const;

    template <typename T> void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    static std::uint64_t split_mix(std::uint64_t x);
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// SHA-256 of a byte buffer, lowercase hex.
std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);
/// SHA-256 of a file's contents. Throws DataError if unreadable.
std::string sha256_file(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file_atomic(const std::string& path, const std::string& content);

bool all_finite(const std::vector<double>& v);

} // namespace ugt
