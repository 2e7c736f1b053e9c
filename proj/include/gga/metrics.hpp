#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <gga/trace.hpp>

namespace gga::metrics {

struct PrdResult {
    double prd = 0.0;
    std::size_t layers = 0;
    std::size_t heads = 0;
    // [L][H] row-major: mean over answer rows of (mass on S - mass off S).
    std::vector<double> per_layer_head;
};

struct SasResult {
    double sas = 0.0;
    // Raw max-cosine per answer token, before clamping.
    std::vector<double> per_token;
    std::vector<std::size_t> argmax_triple;
    // Hidden states and triple encodings come from different layers.
    bool layer_mismatch = false;
};

// Softmax over one row of raw scores. Entries at or below the masked sentinel
// get zero weight.
std::vector<double> softmax_row(std::span<const float> scores);

/// Path Reliance Degree: mean over layers, heads and answer rows of the
/// attention mass on the shortest-path positions minus the mass elsewhere.
/// Raw-score traces are softmax-normalized per row first.
///
/// Throws EmptyAnswerError / EmptyPathError.
PrdResult prd(const trace::TraceExample& ex);

/// Masked mean of hidden-state rows ([rows][dim], row-major).
/// Throws AllMaskedError when no row is selected.
std::vector<double> triple_pool(std::span<const float> hidden, std::size_t dim, const std::vector<bool>& mask);

double cosine(std::span<const float> a, std::span<const float> b);

/// Semantic Alignment Score: per answer token, the best cosine against any
/// triple embedding; clamped to [0, 1] per token and averaged.
///
/// Throws EmptyAnswerError, ZeroVectorError (norm < 1e-12) or InputError on
/// an empty triple set.
SasResult sas(const trace::TraceExample& ex);

} // namespace gga::metrics
