#pragma once

#include <cassert>
#include <cstddef>
#include <random>
#include <vector>

namespace mingle {

// Dense row-major matrix. Vectors are 1xN matrices so the parameter registry,
// flatten/unflatten and the optimizer treat every tensor uniformly.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}

  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
  double* row(int i) { return a.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const { return a.data() + static_cast<size_t>(i) * cols; }
  size_t size() const { return a.size(); }
  bool empty() const { return a.empty(); }
  void zero() { std::fill(a.begin(), a.end(), 0.0); }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

// out = x * w            x: n x k, w: k x m
Mat matmul(const Mat& x, const Mat& w);
// out = x * w^T          x: n x m, w: k x m
Mat matmul_nt(const Mat& x, const Mat& w);
// w += x^T * y           x: n x k, y: n x m, w: k x m
void accumulate_tn(Mat& w, const Mat& x, const Mat& y);
// x(i,:) += b for all i  b: 1 x cols
void add_bias(Mat& x, const Mat& b);
// column sums of y into b (1 x cols), accumulated
void accumulate_colsum(Mat& b, const Mat& y);

void relu_inplace(Mat& x);
// dy masked by relu'(pre): result(i,j) = dy(i,j) * (pre(i,j) > 0)
Mat relu_backward(const Mat& dy, const Mat& pre);

void axpy(Mat& y, double alpha, const Mat& x);  // y += alpha * x

bool all_finite(const Mat& x);

void fill_uniform(Mat& x, double lo, double hi, std::mt19937_64& g);

double dot(const double* a, const double* b, int n);

double l2_norm(const std::vector<double>& v);
double cosine(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace mingle
