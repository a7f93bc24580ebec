#include "coalign/numeric.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "coalign/rng.hpp"

namespace coalign {

Mat orthogonal_init(int rows, int cols, std::uint64_t seed) {
  const bool wide = rows < cols;
  const int r = wide ? cols : rows;
  const int c = wide ? rows : cols;

  Rng rng(seed);
  Mat g(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) g(i, j) = rng.normal();

  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ() * Mat::Identity(r, c);
  Mat rr = qr.matrixQR().topRows(c).triangularView<Eigen::Upper>();
  // Sign-fix against R's diagonal so the factor is unique.
  for (int j = 0; j < c; ++j)
    if (rr(j, j) < 0) q.col(j) = -q.col(j);

  return wide ? Mat(q.transpose()) : q;
}

void sgd_step(std::vector<Parameter*>& params, double lr) {
  for (Parameter* p : params) {
    if (!p->grad.allFinite())
      throw std::runtime_error("non-finite gradient in parameter '" + p->name +
                               "'");
  }
  for (Parameter* p : params) {
    p->value.noalias() -= lr * p->grad;
    p->zero_grad();
  }
}

GradCheckReport grad_check(const std::function<double()>& loss_and_grads,
                           const std::vector<Parameter*>& params, double eps,
                           double tol, int max_coords, std::uint64_t seed) {
  GradCheckReport report;

  for (Parameter* p : params) p->zero_grad();
  loss_and_grads();
  std::vector<Mat> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) {
    analytic.push_back(p->grad);
    p->zero_grad();
  }

  Rng rng(seed ^ 0x6a09e667f3bcc908ULL);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter* p = params[pi];
    const std::size_t n = static_cast<std::size_t>(p->value.size());

    std::vector<std::size_t> coords;
    if (max_coords <= 0 || n <= static_cast<std::size_t>(max_coords)) {
      coords.resize(n);
      for (std::size_t k = 0; k < n; ++k) coords[k] = k;
    } else {
      coords.resize(static_cast<std::size_t>(max_coords));
      for (auto& c : coords) c = rng.bounded(n);
    }

    double* data = p->value.data();
    const double* grad = analytic[pi].data();
    for (std::size_t k : coords) {
      const double orig = data[k];
      data[k] = orig + eps;
      const double f_plus = loss_and_grads();
      data[k] = orig - eps;
      const double f_minus = loss_and_grads();
      data[k] = orig;
      for (Parameter* q : params) q->zero_grad();

      const double numeric = (f_plus - f_minus) / (2.0 * eps);
      const double a = grad[k];
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      const double rel = std::abs(a - numeric) / denom;
      ++report.coords_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = p->name;
        report.worst_coord = k;
        report.analytic_at_worst = a;
        report.numeric_at_worst = numeric;
      }
    }
  }

  report.pass = report.max_rel_err <= tol;
  return report;
}

namespace {

void write_value(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << buf;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<const Parameter*>& params,
                     std::uint64_t config_hash) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write checkpoint: " + path);
  os << params.size() << "\n";
  for (const Parameter* p : params) {
    os << p->name << " " << p->value.rows() << " " << p->value.cols() << "\n";
    for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
      for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
        if (j) os << " ";
        write_value(os, p->value(i, j));
      }
      os << "\n";
    }
  }

  std::ofstream ms(path + ".manifest.json");
  ms << "{\"config_hash\":\"";
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(config_hash));
  ms << buf << "\",\"parameters\":[";
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (i) ms << ",";
    ms << "\"" << params[i]->name << "\"";
  }
  ms << "]}\n";
}

void load_checkpoint(const std::string& path,
                     const std::vector<Parameter*>& params) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read checkpoint: " + path);
  std::size_t count = 0;
  is >> count;
  if (count != params.size())
    throw InputError("checkpoint " + path + " has " + std::to_string(count) +
                     " parameters, expected " + std::to_string(params.size()));
  for (Parameter* p : params) {
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    is >> name >> rows >> cols;
    if (!is || name != p->name || rows != p->value.rows() ||
        cols != p->value.cols())
      throw InputError("checkpoint record mismatch for parameter '" + p->name +
                       "' in " + path);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) is >> p->value(i, j);
    p->zero_grad();
  }
  if (!is) throw InputError("truncated checkpoint: " + path);
}

}  // namespace coalign
