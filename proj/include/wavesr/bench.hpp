#pragma once

#include <string>
#include <vector>

#include "wavesr/config.hpp"
#include "wavesr/model.hpp"

namespace wsr {

struct BenchResult {
    std::string name;
    std::vector<double> samples_ms;
    double mean_ms = 0.0;
    double stddev_ms = 0.0;  // population standard deviation
};

struct NamedModel {
    std::string name;
    const Model* model;
};

/// Single-frame inference timing under no-grad on one synthetic frame of
/// height x width at `scale`. Iterations are interleaved across models so
/// drift in machine load hits every config equally.
std::vector<BenchResult> run_bench(const std::vector<NamedModel>& models, const BenchConfig& cfg,
                                   std::uint64_t seed);

/// Keeps large tensor buffers on the heap instead of fresh mmaps so repeated
/// forwards do not pay page-fault costs. No-op outside glibc.
void tune_allocator();

/// Mean/stddev table plus overhead relative to the first entry.
std::string format_bench_report(const std::vector<BenchResult>& results, const BenchConfig& cfg);

}  // namespace wsr
