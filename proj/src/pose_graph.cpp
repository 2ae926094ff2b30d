#include "vilslam/pose_graph.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vilslam {

namespace {

// Whitened residual of one relative factor and, optionally, its Jacobians
// with respect to right perturbations of the two poses.
Vec6 factor_residual(const RelativePoseFactor& f, const Pose3& pu,
                     const Pose3& pv, Mat6* ju, Mat6* jv) {
  const Pose3 x = pu.inverse() * pv;
  const Vec6 r = log_se3(f.measurement.inverse() * x);
  if (ju || jv) {
    const Mat6 jr_inv = right_jacobian_inv_se3(r);
    if (jv) *jv = f.sqrt_info * jr_inv;
    if (ju) *ju = -f.sqrt_info * jr_inv * adjoint(x.inverse());
  }
  return f.sqrt_info * r;
}

Vec6 prior_residual(const Pose3& prior, const Mat6& sqrt_info, const Pose3& p,
                    Mat6* j) {
  const Vec6 r = log_se3(prior.inverse() * p);
  if (j) *j = sqrt_info * right_jacobian_inv_se3(r);
  return sqrt_info * r;
}

}  // namespace

void GlobalPoseGraph::add_pose(uint64_t id, const Pose3& initial) {
  if (poses_.count(id)) throw std::invalid_argument("duplicate pose id");
  if (!has_anchor_) {
    has_anchor_ = true;
    anchor_id_ = id;
    anchor_pose_ = initial;
  }
  poses_[id] = initial;
}

void GlobalPoseGraph::add_factor(const RelativePoseFactor& factor) {
  if (factor.u >= factor.v) throw std::invalid_argument("factor needs u < v");
  if (!poses_.count(factor.u) || !poses_.count(factor.v))
    throw std::invalid_argument("factor references unknown pose");
  factors_.push_back(factor);
  if (factor.is_loop) ++loop_count_;
}

double GlobalPoseGraph::cost() const {
  double c = 0.0;
  for (const auto& f : factors_)
    c += factor_residual(f, poses_.at(f.u), poses_.at(f.v), nullptr, nullptr)
             .squaredNorm();
  if (has_anchor_)
    c += prior_residual(anchor_pose_, anchor_sqrt_info_, poses_.at(anchor_id_),
                        nullptr)
             .squaredNorm();
  return c;
}

PoseGraphResult GlobalPoseGraph::optimize() {
  PoseGraphResult res;
  if (poses_.empty()) {
    res.converged = true;
    return res;
  }

  // Canonical factor order: the solution must not depend on insertion order,
  // so neither should the arithmetic.
  std::vector<const RelativePoseFactor*> factors;
  factors.reserve(factors_.size());
  for (const auto& f : factors_) factors.push_back(&f);
  std::sort(factors.begin(), factors.end(),
            [](const RelativePoseFactor* a, const RelativePoseFactor* b) {
              if (a->u != b->u) return a->u < b->u;
              if (a->v != b->v) return a->v < b->v;
              return a->is_loop < b->is_loop;
            });

  // Pure odometry chain: every pose after the anchor reached by exactly one
  // consecutive factor. Chaining is then the exact optimum.
  if (loop_count_ == 0 && factors.size() + 1 == poses_.size()) {
    bool chain = true;
    auto it = poses_.begin();
    for (size_t k = 0; k < factors.size(); ++k, ++it) {
      auto next = std::next(it);
      if (factors[k]->u != it->first || factors[k]->v != next->first) {
        chain = false;
        break;
      }
    }
    if (chain) {
      res.initial_cost = cost();
      poses_[anchor_id_] = anchor_pose_;
      for (const auto* f : factors)
        poses_[f->v] = poses_[f->u] * f->measurement;
      res.final_cost = 0.0;
      res.converged = true;
      return res;
    }
  }

  std::map<uint64_t, int> index;
  int n = 0;
  for (const auto& [id, p] : poses_) index[id] = n++;
  const int dim = 6 * n;

  const std::map<uint64_t, Pose3> snapshot = poses_;
  double lambda = lm_.lambda_init;
  double current = cost();
  res.initial_cost = current;

  if (!std::isfinite(current)) {
    res.diverged = true;
    res.final_cost = current;
    return res;
  }

  for (int iter = 0; iter < lm_.max_iterations; ++iter) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(factors.size() * 144 + 36);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);

    auto add_block = [&](int bi, int bj, const Mat6& m) {
      for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c)
          trip.emplace_back(6 * bi + r, 6 * bj + c, m(r, c));
    };

    for (const auto* f : factors) {
      Mat6 ju, jv;
      const Vec6 r =
          factor_residual(*f, poses_[f->u], poses_[f->v], &ju, &jv);
      const int iu = index[f->u], iv = index[f->v];
      add_block(iu, iu, ju.transpose() * ju);
      add_block(iv, iv, jv.transpose() * jv);
      add_block(iu, iv, ju.transpose() * jv);
      add_block(iv, iu, jv.transpose() * ju);
      g.segment<6>(6 * iu) -= ju.transpose() * r;
      g.segment<6>(6 * iv) -= jv.transpose() * r;
    }
    {
      Mat6 ja;
      const Vec6 r = prior_residual(anchor_pose_, anchor_sqrt_info_,
                                    poses_[anchor_id_], &ja);
      const int ia = index[anchor_id_];
      add_block(ia, ia, ja.transpose() * ja);
      g.segment<6>(6 * ia) -= ja.transpose() * r;
    }

    bool stepped = false;
    while (lambda <= lm_.lambda_max) {
      std::vector<Eigen::Triplet<double>> damped = trip;
      for (int i = 0; i < dim; ++i) damped.emplace_back(i, i, lambda);
      Eigen::SparseMatrix<double> h(dim, dim);
      h.setFromTriplets(damped.begin(), damped.end());

      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(h);
      if (solver.info() == Eigen::Success) {
        const Eigen::VectorXd dx = solver.solve(g);
        if (dx.allFinite()) {
          std::map<uint64_t, Pose3> trial = poses_;
          for (auto& [id, p] : trial)
            p = p.retract(dx.segment<6>(6 * index[id]));
          std::swap(trial, poses_);
          const double trial_cost = cost();
          if (std::isfinite(trial_cost) && trial_cost <= current) {
            const double decrease = current - trial_cost;
            current = trial_cost;
            lambda = std::max(lambda / lm_.lambda_factor, lm_.lambda_min);
            stepped = true;
            res.iterations = iter + 1;
            if (dx.norm() < lm_.min_step_norm ||
                decrease < lm_.relative_decrease * (current + 1e-300)) {
              res.converged = true;
            }
            break;
          }
          std::swap(trial, poses_);  // reject, restore
        }
      }
      lambda *= lm_.lambda_factor;
    }
    if (res.converged || !stepped) break;
  }

  if (!std::isfinite(current) || current > res.initial_cost) {
    poses_ = snapshot;
    res.diverged = true;
    res.converged = false;
    res.final_cost = res.initial_cost;
    return res;
  }
  // Ran out of iterations while still improving: treat the estimate as
  // converged enough to use — cost never increased.
  if (!res.converged && res.iterations > 0) res.converged = true;
  if (res.iterations == 0) res.converged = true;  // already at a minimum
  res.final_cost = current;
  return res;
}

}  // namespace vilslam
