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

#pragma once

#include "cmfd/image.hpp"
#include "cmfd/tensor.hpp"

namespace cmfd {

inline constexpr double kLogClamp = 1e-12;
inline constexpr double kDefaultGamma = 1000.0;

struct LossBreakdown {
  double ce_f = 0.0;
  double ce_d = 0.0;
  double mse = 0.0;
  double total = 0.0;  // ce_f + ce_d + gamma * mse, evaluated in that order
  double gamma = 0.0;
};

// Gradients of the total loss with respect to both logit tensors.
struct LogitGradients {
  Tensor det;
  Tensor dist;
};

// Pixel-mean binary cross-entropy of the 2-channel detection logits against
// a 0/1 mask; log arguments are clamped at kLogClamp.
double ce_binary(const Tensor& det_logits, const LabelMap& y_f);

// Pixel-mean categorical cross-entropy of the 3-channel distinguishment logits
// against tri-class labels.
double ce_three(const Tensor& dist_logits, const LabelMap& y_d);

// Pixel-mean squared difference between the detection forged probability and
// the distinguishment source+target probability.
double mse_consistency(const Tensor& det_logits, const Tensor& dist_logits);

inline double combine_terms(double ce_f, double ce_d, double mse, double gamma) {
  return ce_f + ce_d + gamma * mse;
}

LossBreakdown total_loss(const Tensor& det_logits, const Tensor& dist_logits, const LabelMap& y_f,
                         const LabelMap& y_d, double gamma);

// Same value as total_loss, plus d(total)/d(logits) for both heads.
LossBreakdown total_loss_and_gradients(const Tensor& det_logits, const Tensor& dist_logits, const LabelMap& y_f,
                                       const LabelMap& y_d, double gamma, LogitGradients& grads);

}  // namespace cmfd
