#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "ino/numerics/rng.hpp"
#include "ino/numerics/tensor.hpp"

namespace ino::test {

inline Tensor<double> random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0, bool grad = false) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor<double>(std::move(shape), std::move(v), grad);
}

inline std::vector<double> to_vec(const Tensor<double>& t) { return {t.data().begin(), t.data().end()}; }

inline std::vector<double> random_distribution(Rng& rng, std::size_t n) {
    std::vector<double> p(n);
    double s = 0;
    for (auto& x : p) s += (x = rng.uniform(0.05, 1.0));
    for (auto& x : p) x /= s;
    return p;
}

/// Fresh scratch directory under the system temp dir, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("ino_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace ino::test
