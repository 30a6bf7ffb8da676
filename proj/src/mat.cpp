#include "mingle/mat.hpp"

#include <cmath>

#include "mingle/common.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mingle {

// Row-parallel kernels. Each output row is produced by exactly one thread, so
// results are bit-identical for any thread count; accumulating kernels stay
// serial and the callers that need parallel accumulation keep per-thread
// buffers merged in thread order.

Mat matmul(const Mat& x, const Mat& w) {
  assert(x.cols == w.rows);
  Mat out(x.rows, w.cols);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < x.rows; ++i) {
    const double* xi = x.row(i);
    double* oi = out.row(i);
    for (int k = 0; k < x.cols; ++k) {
      double xk = xi[k];
      if (xk == 0.0) continue;
      const double* wk = w.row(k);
      for (int j = 0; j < w.cols; ++j) oi[j] += xk * wk[j];
    }
  }
  return out;
}

Mat matmul_nt(const Mat& x, const Mat& w) {
  assert(x.cols == w.cols);
  Mat out(x.rows, w.rows);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < x.rows; ++i) {
    const double* xi = x.row(i);
    double* oi = out.row(i);
    for (int j = 0; j < w.rows; ++j) oi[j] = dot(xi, w.row(j), x.cols);
  }
  return out;
}

void accumulate_tn(Mat& w, const Mat& x, const Mat& y) {
  assert(x.rows == y.rows && w.rows == x.cols && w.cols == y.cols);
  for (int i = 0; i < x.rows; ++i) {
    const double* xi = x.row(i);
    const double* yi = y.row(i);
    for (int k = 0; k < x.cols; ++k) {
      double xk = xi[k];
      if (xk == 0.0) continue;
      double* wk = w.row(k);
      for (int j = 0; j < y.cols; ++j) wk[j] += xk * yi[j];
    }
  }
}

void add_bias(Mat& x, const Mat& b) {
  assert(b.rows == 1 && b.cols == x.cols);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < x.rows; ++i) {
    double* xi = x.row(i);
    for (int j = 0; j < x.cols; ++j) xi[j] += b.a[j];
  }
}

void accumulate_colsum(Mat& b, const Mat& y) {
  assert(b.rows == 1 && b.cols == y.cols);
  for (int i = 0; i < y.rows; ++i) {
    const double* yi = y.row(i);
    for (int j = 0; j < y.cols; ++j) b.a[j] += yi[j];
  }
}

void relu_inplace(Mat& x) {
  for (double& v : x.a)
    if (v < 0.0) v = 0.0;
}

Mat relu_backward(const Mat& dy, const Mat& pre) {
  assert(dy.same_shape(pre));
  Mat out(dy.rows, dy.cols);
  for (size_t i = 0; i < dy.a.size(); ++i) out.a[i] = pre.a[i] > 0.0 ? dy.a[i] : 0.0;
  return out;
}

void axpy(Mat& y, double alpha, const Mat& x) {
  assert(y.same_shape(x));
  for (size_t i = 0; i < y.a.size(); ++i) y.a[i] += alpha * x.a[i];
}

bool all_finite(const Mat& x) {
  for (double v : x.a)
    if (!std::isfinite(v)) return false;
  return true;
}

void fill_uniform(Mat& x, double lo, double hi, std::mt19937_64& g) {
  for (double& v : x.a) v = lo + (hi - lo) * u01(g);
}

double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  assert(a.size() == b.size());
  double num = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    num += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return num / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace mingle
