#pragma once

#include <complex>
#include <vector>

namespace kfp::fft {

using cplx = std::complex<double>;

enum class Direction { Forward, Backward };

/// Layout of a batch of rank-d transforms inside one buffer.
struct Batch {
  std::vector<int> dims;  // row-major extents of one transform
  int howmany = 1;
  int stride = 1;         // distance between consecutive elements of one transform
  int dist = 0;           // distance between the first elements of consecutive transforms
};

/// In-place unnormalized DFT. Backward followed by Forward scales by the product of dims.
void transform(cplx* data, const Batch& batch, Direction dir);

inline void forward(std::vector<cplx>& data, const std::vector<int>& dims) {
  transform(data.data(), {dims, 1, 1, 0}, Direction::Forward);
}

inline void backward(std::vector<cplx>& data, const std::vector<int>& dims) {
  transform(data.data(), {dims, 1, 1, 0}, Direction::Backward);
}

}  // namespace kfp::fft
