#include "core/svr.hpp"

#include <cmath>
#include <limits>
#include <list>
#include <sstream>
#include <unordered_map>

#include "core/error.hpp"

namespace f2b {

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    fail(ErrorKind::Validation, "kernel dim mismatch: " + std::to_string(x.size()) + " vs " +
                                    std::to_string(y.size()));
  if (spec.kind == KernelKind::Linear) {
    double dot = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) dot += x[k] * y[k];
    return dot;
  }
  double sq = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - y[k];
    sq += d * d;
  }
  return std::exp(-spec.gamma * sq);
}

void SvrHyperParams::validate() const {
  std::ostringstream msg;
  if (!(std::isfinite(c) && c > 0.0)) msg << "c must be positive (got " << c << ")";
  else if (!(std::isfinite(epsilon) && epsilon >= 0.0)) msg << "epsilon must be nonnegative (got " << epsilon << ")";
  else if (!(tolerance > 0.0 && tolerance <= 0.1)) msg << "tolerance must lie in (0, 0.1] (got " << tolerance << ")";
  else return;
  fail(ErrorKind::Validation, msg.str());
}

namespace {

void validate_kernel(const KernelSpec& k) {
  if (k.kind == KernelKind::Rbf && !(std::isfinite(k.gamma) && k.gamma > 0.0))
    fail(ErrorKind::Validation, "rbf gamma must be finite and positive");
}

// Rows of the n x n training kernel matrix.
class KernelCache {
 public:
  KernelCache(std::span<const double> features, std::size_t dim, const KernelSpec& spec, const CacheConfig& cfg)
      : features_(features), dim_(dim), n_(dim ? features.size() / dim : 0), spec_(spec),
        dense_(n_ <= cfg.dense_limit), capacity_(std::max<std::size_t>(cfg.cache_rows, 2)) {
    if (dense_) {
      matrix_.resize(n_ * n_);
      for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j <= i; ++j)
          matrix_[i * n_ + j] = matrix_[j * n_ + i] = eval(i, j);
    }
    diag_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) diag_[i] = dense_ ? matrix_[i * n_ + i] : eval(i, i);
  }

  double diag(std::size_t i) const { return diag_[i]; }

  // The returned span stays valid until two further distinct rows are requested.
  std::span<const double> row(std::size_t i) {
    if (dense_) return {matrix_.data() + i * n_, n_};
    if (auto it = rows_.find(i); it != rows_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second.pos);
      return it->second.values;
    }
    if (rows_.size() >= capacity_) {
      rows_.erase(lru_.back());
      lru_.pop_back();
    }
    lru_.push_front(i);
    auto& entry = rows_[i];
    entry.pos = lru_.begin();
    entry.values.resize(n_);
    for (std::size_t j = 0; j < n_; ++j) entry.values[j] = eval(i, j);
    return entry.values;
  }

 private:
  double eval(std::size_t i, std::size_t j) const {
    return kernel_eval(spec_, features_.subspan(i * dim_, dim_), features_.subspan(j * dim_, dim_));
  }

  struct Entry {
    std::list<std::size_t>::iterator pos;
    std::vector<double> values;
  };

  std::span<const double> features_;
  std::size_t dim_;
  std::size_t n_;
  KernelSpec spec_;
  bool dense_;
  std::size_t capacity_;
  std::vector<double> matrix_;
  std::vector<double> diag_;
  std::list<std::size_t> lru_;
  std::unordered_map<std::size_t, Entry> rows_;
};

constexpr double kTau = 1e-12;

// Working state of the 2n-variable dual. Index t < n is alpha_t (y = +1),
// t >= n is alpha*_{t-n} (y = -1); both refer to training row t mod n.
class SmoSolver {
 public:
  SmoSolver(KernelCache& cache, std::span<const double> targets, const SvrHyperParams& params)
      : cache_(cache), n_(targets.size()), l_(2 * n_), c_(params.c), tol_(params.tolerance),
        alpha_(l_, 0.0), grad_(l_), p_(l_) {
    for (std::size_t t = 0; t < n_; ++t) {
      p_[t] = params.epsilon - targets[t];
      p_[t + n_] = params.epsilon + targets[t];
    }
    grad_ = p_;
  }

  TrainStats run(std::uint64_t max_iterations) {
    TrainStats stats;
    for (;;) {
      std::size_t i = 0, j = 0;
      const double gap = select(i, j);
      stats.max_violation = gap;
      if (gap <= tol_) break;
      if (stats.iterations >= max_iterations) {
        std::ostringstream msg;
        msg << "SMO did not converge in " << max_iterations << " iterations; max KKT violation " << gap;
        throw ConvergenceError(msg.str(), gap);
      }
      update(i, j);
      ++stats.iterations;
    }
    double half = 0.0;
    for (std::size_t t = 0; t < l_; ++t) half += alpha_[t] * (grad_[t] + p_[t]);
    stats.dual_objective = -0.5 * half;
    return stats;
  }

  double coeff(std::size_t row) const { return alpha_[row] - alpha_[row + n_]; }

  // Offset b with f(x) = sum u K + b; averaged over free variables, otherwise
  // the midpoint of the feasible interval.
  double bias() const {
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < l_; ++t) {
      const double yg = sign(t) * grad_[t];
      if (at_upper(t)) {
        if (sign(t) < 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else if (at_lower(t)) {
        if (sign(t) > 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else {
        ++n_free;
        sum_free += yg;
      }
    }
    const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
    return -rho;
  }

 private:
  double sign(std::size_t t) const { return t < n_ ? 1.0 : -1.0; }
  std::size_t base(std::size_t t) const { return t < n_ ? t : t - n_; }
  bool at_upper(std::size_t t) const { return alpha_[t] >= c_; }
  bool at_lower(std::size_t t) const { return alpha_[t] <= 0.0; }

  double q(std::span<const double> krow, std::size_t t_row, std::size_t t) const {
    return sign(t_row) * sign(t) * krow[base(t)];
  }

  // Maximal violator i, partner j by second-order gain; ties go to the lowest
  // index. Returns m(alpha) - M(alpha).
  double select(std::size_t& out_i, std::size_t& out_j) {
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t imax = l_;
    for (std::size_t t = 0; t < l_; ++t) {
      const double v = -sign(t) * grad_[t];
      const bool in_up = sign(t) > 0 ? !at_upper(t) : !at_lower(t);
      if (in_up && v > gmax) {
        gmax = v;
        imax = t;
      }
    }

    double gmax2 = -std::numeric_limits<double>::infinity();
    std::size_t jmin = l_;
    double obj_min = std::numeric_limits<double>::infinity();
    std::span<const double> krow_i;
    if (imax != l_) krow_i = cache_.row(base(imax));
    for (std::size_t t = 0; t < l_; ++t) {
      const bool in_low = sign(t) > 0 ? !at_lower(t) : !at_upper(t);
      if (!in_low) continue;
      const double v = sign(t) * grad_[t];
      gmax2 = std::max(gmax2, v);
      if (imax == l_) continue;
      const double grad_diff = gmax + v;
      if (grad_diff <= 0.0) continue;
      double quad = cache_.diag(base(imax)) + cache_.diag(base(t)) - 2.0 * krow_i[base(t)];
      if (quad <= 0.0) quad = kTau;
      const double obj = -(grad_diff * grad_diff) / quad;
      if (obj < obj_min) {
        obj_min = obj;
        jmin = t;
      }
    }

    out_i = imax;
    out_j = jmin;
    const double gap = gmax + gmax2;
    if (imax == l_ || jmin == l_) return std::isfinite(gap) ? std::min(gap, 0.0) : 0.0;
    return gap;
  }

  void update(std::size_t i, std::size_t j) {
    const auto row_i = cache_.row(base(i));
    const double qij = q(row_i, i, j);
    const double qii = cache_.diag(base(i));
    const double qjj = cache_.diag(base(j));
    const double old_i = alpha_[i];
    const double old_j = alpha_[j];
    double& ai = alpha_[i];
    double& aj = alpha_[j];

    if (sign(i) != sign(j)) {
      double quad = qii + qjj + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad_[i] - grad_[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) { aj = 0.0; ai = diff; }
      } else {
        if (ai < 0.0) { ai = 0.0; aj = -diff; }
      }
      if (diff > 0.0) {
        if (ai > c_) { ai = c_; aj = c_ - diff; }
      } else {
        if (aj > c_) { aj = c_; ai = c_ + diff; }
      }
    } else {
      double quad = qii + qjj - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad_[i] - grad_[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > c_) {
        if (ai > c_) { ai = c_; aj = sum - c_; }
      } else {
        if (aj < 0.0) { aj = 0.0; ai = sum; }
      }
      if (sum > c_) {
        if (aj > c_) { aj = c_; ai = sum - c_; }
      } else {
        if (ai < 0.0) { ai = 0.0; aj = sum; }
      }
    }

    const double di = ai - old_i;
    const double dj = aj - old_j;
    const auto row_j = cache_.row(base(j));
    for (std::size_t t = 0; t < l_; ++t)
      grad_[t] += q(row_i, i, t) * di + q(row_j, j, t) * dj;
  }

  KernelCache& cache_;
  std::size_t n_;
  std::size_t l_;
  double c_;
  double tol_;
  std::vector<double> alpha_;
  std::vector<double> grad_;
  std::vector<double> p_;
};

}  // namespace

TrainResult train_matrix(std::span<const double> features, std::size_t dim, std::span<const double> targets,
                         const KernelSpec& kernel, const SvrHyperParams& params, const CacheConfig& cache_cfg) {
  params.validate();
  const std::size_t n = targets.size();
  if (n < 2) fail(ErrorKind::Validation, "training needs at least 2 points, got " + std::to_string(n));
  if (dim == 0 || features.size() != n * dim) fail(ErrorKind::Validation, "feature matrix shape mismatch");
  for (double z : targets)
    if (!std::isfinite(z)) fail(ErrorKind::Validation, "non-finite training target");

  KernelSpec spec = kernel;
  if (spec.kind == KernelKind::Rbf && spec.gamma == 0.0) spec.gamma = 1.0 / static_cast<double>(dim);
  validate_kernel(spec);

  SvrHyperParams resolved = params;
  if (resolved.max_passes == 0) resolved.max_passes = 10 * static_cast<std::uint64_t>(n);

  KernelCache cache(features, dim, spec, cache_cfg);
  SmoSolver solver(cache, targets, resolved);
  TrainResult result;
  result.stats = solver.run(resolved.max_passes * 2 * n);

  auto& model = result.model;
  model.kernel = spec;
  model.params = resolved;
  model.dim = dim;
  model.bias = solver.bias();
  for (std::size_t r = 0; r < n; ++r) {
    const double u = solver.coeff(r);
    if (u == 0.0) continue;
    SupportVector sv;
    sv.record_id = std::to_string(r);
    sv.vec.assign(features.begin() + static_cast<std::ptrdiff_t>(r * dim),
                  features.begin() + static_cast<std::ptrdiff_t>((r + 1) * dim));
    sv.coeff = u;
    model.support.push_back(std::move(sv));
  }
  return result;
}

TrainResult train_detailed(const Dataset& ds, std::span<const std::size_t> rows, const KernelSpec& kernel,
                           const SvrHyperParams& params, std::uint64_t /*seed*/, const CacheConfig& cache) {
  const std::size_t dim = ds.dim();
  std::vector<double> features;
  std::vector<double> targets;
  features.reserve(rows.size() * dim);
  targets.reserve(rows.size());
  for (auto r : rows) {
    if (r >= ds.size()) fail(ErrorKind::Validation, "training row out of range");
    const auto x = ds.row(r);
    features.insert(features.end(), x.begin(), x.end());
    targets.push_back(ds.record(r).bmi);
  }
  auto result = train_matrix(features, dim, targets, kernel, params, cache);
  result.model.normalize = ds.normalized();
  for (auto& sv : result.model.support) sv.record_id = ds.record(rows[std::stoul(sv.record_id)]).record_id;
  return result;
}

SvrModel train(const Dataset& ds, std::span<const std::string> ids, const KernelSpec& kernel,
               const SvrHyperParams& params, std::uint64_t seed) {
  std::vector<std::size_t> rows;
  rows.reserve(ids.size());
  for (const auto& id : ids) rows.push_back(ds.index_of(id));
  return train_detailed(ds, rows, kernel, params, seed).model;
}

double predict(const SvrModel& model, std::span<const double> x) {
  if (x.size() != model.dim)
    fail(ErrorKind::Validation, "input dim " + std::to_string(x.size()) + " does not match model dim " +
                                    std::to_string(model.dim));
  double f = 0.0;
  for (const auto& sv : model.support) f += sv.coeff * kernel_eval(model.kernel, sv.vec, x);
  return f + model.bias;
}

}  // namespace f2b
