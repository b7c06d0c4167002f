#include "lsm/types.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace lsm {

std::mt19937_64 make_rng(const SeededStream& stream) {
  std::seed_seq seq{
      static_cast<std::uint32_t>(stream.seed & 0xffffffffu),
      static_cast<std::uint32_t>(stream.seed >> 32),
      static_cast<std::uint32_t>(stream.stream_id & 0xffffffffu),
      static_cast<std::uint32_t>(stream.stream_id >> 32),
  };
  return std::mt19937_64(seq);
}

Mat mat_exp(const Mat& a, double t) {
  const auto n = a.rows();
  if (n != a.cols()) throw std::invalid_argument("mat_exp: matrix must be square");
  if (n == 1) {
    Mat r(1, 1);
    r(0, 0) = std::exp(a(0, 0) * t);
    return r;
  }
  if (a.isDiagonal(0.0)) {
    Mat r = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) r(i, i) = std::exp(a(i, i) * t);
    return r;
  }
  Eigen::MatrixXd at = a * t;
  Eigen::MatrixXd e = at.exp();
  return Mat(e);
}

bool spectrum_stable(const Mat& a) {
  if (a.rows() == 1) return a(0, 0) < 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(a), false);
  return (es.eigenvalues().real().array() < 0.0).all();
}

void parallel_for_indexed(int count, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  const int workers = std::min(threads, count);
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr error;
  std::mutex error_mu;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace lsm
