// Copyright 2026 The cmfd Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cmfd/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cmfd/network.hpp"

namespace cmfd {

namespace {

void check_logits(const Tensor& logits, std::size_t classes, const char* what) {
  if (logits.rank() != 3 || logits.dim(0) != classes)
    throw ShapeError(std::string(what) + ": expected " + std::to_string(classes) + " x H x W logits, got " +
                     shape_string(logits.shape()));
}

void check_labels(const Tensor& logits, const LabelMap& labels, std::uint8_t max_label, const char* what) {
  if (labels.height != logits.dim(1) || labels.width != logits.dim(2))
    throw ShapeError(std::string(what) + ": label map " + std::to_string(labels.height) + "x" +
                     std::to_string(labels.width) + " does not match logits " + shape_string(logits.shape()));
  for (const std::uint8_t v : labels.labels)
    if (v > max_label)
      throw ValidationError(std::string(what) + ": label " + std::to_string(v) + " out of range");
}

// Mean of -log(max(p[label], clamp)); optionally writes d/d(logits).
double cross_entropy(const Tensor& logits, const LabelMap& labels, Tensor* grad, double weight) {
  const std::size_t classes = logits.dim(0), hw = labels.size();
  const Tensor p = softmax_channels(logits);
  const double inv_hw = 1.0 / static_cast<double>(hw);
  double sum = 0.0;
  for (std::size_t i = 0; i < hw; ++i) {
    const std::size_t y = labels.labels[i];
    const double py = p[y * hw + i];
    sum += -std::log(std::max(py, kLogClamp));
    if (grad && py >= kLogClamp)
      for (std::size_t k = 0; k < classes; ++k)
        (*grad)[k * hw + i] += weight * inv_hw * (p[k * hw + i] - (k == y ? 1.0 : 0.0));
  }
  return sum * inv_hw;
}

double consistency(const Tensor& det_logits, const Tensor& dist_logits, Tensor* grad_det, Tensor* grad_dist,
                   double weight) {
  if (det_logits.dim(1) != dist_logits.dim(1) || det_logits.dim(2) != dist_logits.dim(2))
    throw ShapeError("mse_consistency: spatial shapes differ " + shape_string(det_logits.shape()) + " vs " +
                     shape_string(dist_logits.shape()));
  const std::size_t hw = det_logits.dim(1) * det_logits.dim(2);
  const Tensor pf = softmax_channels(det_logits);
  const Tensor pd = softmax_channels(dist_logits);
  const double inv_hw = 1.0 / static_cast<double>(hw);
  double sum = 0.0;
  for (std::size_t i = 0; i < hw; ++i) {
    const double forged_f = pf[hw + i];
    const double forged_d = pd[hw + i] + pd[2 * hw + i];
    const double diff = forged_f - forged_d;
    sum += diff * diff;
    if (grad_det) {
      const double d = weight * 2.0 * diff * inv_hw;
      // d pf1 / d l1 = pf1 pf0, d pf1 / d l0 = -pf1 pf0
      const double jf = forged_f * pf[i];
      (*grad_det)[i] -= d * jf;
      (*grad_det)[hw + i] += d * jf;
      // forged_d = 1 - q0 and d q0 / d l_k = q0 (delta_k0 - q_k), so the
      // sign flips relative to the detection head.
      const double q0 = pd[i];
      (*grad_dist)[i] += d * q0 * (1.0 - q0);
      (*grad_dist)[hw + i] -= d * q0 * pd[hw + i];
      (*grad_dist)[2 * hw + i] -= d * q0 * pd[2 * hw + i];
    }
  }
  return sum * inv_hw;
}

}  // namespace

double ce_binary(const Tensor& det_logits, const LabelMap& y_f) {
  check_logits(det_logits, 2, "ce_binary");
  check_labels(det_logits, y_f, 1, "ce_binary");
  return cross_entropy(det_logits, y_f, nullptr, 0.0);
}

double ce_three(const Tensor& dist_logits, const LabelMap& y_d) {
  check_logits(dist_logits, 3, "ce_three");
  check_labels(dist_logits, y_d, 2, "ce_three");
  return cross_entropy(dist_logits, y_d, nullptr, 0.0);
}

double mse_consistency(const Tensor& det_logits, const Tensor& dist_logits) {
  check_logits(det_logits, 2, "mse_consistency");
  check_logits(dist_logits, 3, "mse_consistency");
  return consistency(det_logits, dist_logits, nullptr, nullptr, 0.0);
}

LossBreakdown total_loss(const Tensor& det_logits, const Tensor& dist_logits, const LabelMap& y_f,
                         const LabelMap& y_d, double gamma) {
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
  LossBreakdown out;
  out.gamma = gamma;
  out.ce_f = ce_binary(det_logits, y_f);
  out.ce_d = ce_three(dist_logits, y_d);
  out.mse = mse_consistency(det_logits, dist_logits);
  out.total = combine_terms(out.ce_f, out.ce_d, out.mse, gamma);
  return out;
}

LossBreakdown total_loss_and_gradients(const Tensor& det_logits, const Tensor& dist_logits, const LabelMap& y_f,
                                       const LabelMap& y_d, double gamma, LogitGradients& grads) {
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
  check_logits(det_logits, 2, "total_loss");
  check_logits(dist_logits, 3, "total_loss");
  check_labels(det_logits, y_f, 1, "total_loss");
  check_labels(dist_logits, y_d, 2, "total_loss");
  grads.det = Tensor(det_logits.shape());
  grads.dist = Tensor(dist_logits.shape());
  LossBreakdown out;
  out.gamma = gamma;
  out.ce_f = cross_entropy(det_logits, y_f, &grads.det, 1.0);
  out.ce_d = cross_entropy(dist_logits, y_d, &grads.dist, 1.0);
  out.mse = consistency(det_logits, dist_logits, &grads.det, &grads.dist, gamma);
  out.total = combine_terms(out.ce_f, out.ce_d, out.mse, gamma);
  return out;
}

}  // namespace cmfd
