#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace coalign {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A trainable tensor: value plus a gradient accumulator of the same shape.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;

  Parameter() = default;
  Parameter(std::string n, Mat v)
      : name(std::move(n)), value(std::move(v)),
        grad(Mat::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(); }
};

/// Orthonormal factor of a seeded Gaussian matrix. Square outputs satisfy
/// ||Q^T Q - I||_max < 1e-10; wide outputs have orthonormal rows, tall ones
/// orthonormal columns. Deterministic under seed.
Mat orthogonal_init(int rows, int cols, std::uint64_t seed);

/// value <- value - lr * grad for every parameter, then grads are zeroed.
/// Throws if any gradient is non-finite, naming the parameter.
void sgd_step(std::vector<Parameter*>& params, double lr);

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t coords_checked = 0;
  bool pass = false;
  std::string worst_param;
  std::size_t worst_coord = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

/// Central-difference check of analytic gradients. `loss_and_grads` must
/// compute the scalar loss and accumulate analytic gradients into the
/// parameters; it has to be deterministic (freeze any sampling first).
/// Checks at most `max_coords` coordinates per parameter (all if <= 0),
/// sampled deterministically. Relative error uses max(1, |a|, |n|) in the
/// denominator. Values and grads are restored/zeroed before returning.
GradCheckReport grad_check(const std::function<double()>& loss_and_grads,
                           const std::vector<Parameter*>& params, double eps,
                           double tol, int max_coords = -1,
                           std::uint64_t seed = 0);

/// Text checkpoint: one `name rows cols` record per parameter followed by
/// row-major values at full precision. The manifest (path + ".manifest.json")
/// lists parameter names and the config hash.
void save_checkpoint(const std::string& path,
                     const std::vector<const Parameter*>& params,
                     std::uint64_t config_hash);

/// Loads values into an existing parameter set; shapes and names must match
/// the records in the file, in order.
void load_checkpoint(const std::string& path,
                     const std::vector<Parameter*>& params);

inline bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace coalign
