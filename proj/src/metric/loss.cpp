#include <algorithm>
#include <cmath>

#include "convsv/common/error.hpp"
#include "convsv/metric/metric.hpp"

namespace convsv {

double contrastive_loss(std::span<const double> x_i, std::span<const double> x_j, bool positive,
                        double margin, bool clamp) {
  const double dist = set_distance(x_i, x_j);
  if (positive) return dist;
  const double t = margin - dist;
  return clamp ? std::max(0.0, t) : t;
}

double accumulate_pair_gradient(const ProjectionHead& head, std::span<const double> a,
                                std::span<const double> b, bool positive, double margin,
                                bool clamp, double scale, std::span<double> grad) {
  const std::size_t out = head.out_dim;
  const std::size_t in = head.in_dim;
  thread_local Vector xi;
  thread_local Vector xj;
  xi.resize(out);
  xj.resize(out);
  head.apply(a, xi);
  head.apply(b, xj);

  const double loss = contrastive_loss(xi, xj, positive, margin, clamp);

  double dot = 0.0;
  double ni2 = 0.0;
  double nj2 = 0.0;
  for (std::size_t r = 0; r < out; ++r) {
    dot += xi[r] * xj[r];
    ni2 += xi[r] * xi[r];
    nj2 += xj[r] * xj[r];
  }
  if (ni2 == 0.0 || nj2 == 0.0) return loss;

  // d(loss)/d(cos): -1 for positives; +1 for negatives inside the margin.
  double dloss_dcos;
  if (positive) {
    dloss_dcos = -1.0;
  } else {
    const double dist = 1.0 - std::clamp(dot / std::sqrt(ni2 * nj2), -1.0, 1.0);
    dloss_dcos = (!clamp || margin - dist > 0.0) ? 1.0 : 0.0;
  }
  if (dloss_dcos == 0.0) return loss;

  const double ni = std::sqrt(ni2);
  const double nj = std::sqrt(nj2);
  const double cos = dot / (ni * nj);
  const double k = scale * dloss_dcos;
  for (std::size_t r = 0; r < out; ++r) {
    const double gi = k * (xj[r] / (ni * nj) - cos * xi[r] / ni2);
    const double gj = k * (xi[r] / (ni * nj) - cos * xj[r] / nj2);
    double* row = grad.data() + r * in;
    for (std::size_t c = 0; c < in; ++c) row[c] += gi * a[c] + gj * b[c];
  }
  return loss;
}

Vector loss_gradient(std::span<const double> a, std::span<const double> b, bool positive,
                     double margin, const ProjectionHead& head, bool clamp) {
  if (a.size() != head.in_dim || b.size() != head.in_dim) {
    throw Error(ErrorKind::kMismatch, "loss_gradient: input dim does not match head");
  }
  Vector grad(head.out_dim * head.in_dim, 0.0);
  accumulate_pair_gradient(head, a, b, positive, margin, clamp, 1.0, grad);
  return grad;
}

double projected_loss(const ProjectionHead& head, std::span<const double> a,
                      std::span<const double> b, bool positive, double margin, bool clamp) {
  return contrastive_loss(head.apply(a), head.apply(b), positive, margin, clamp);
}

}  // namespace convsv
