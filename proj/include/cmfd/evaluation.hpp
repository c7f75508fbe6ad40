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

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmfd/dataset.hpp"
#include "cmfd/image.hpp"
#include "cmfd/network.hpp"

namespace cmfd {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Precision, recall and F1 with the empty-denominator rules: a class that is
// absent and never predicted scores (1, 1, 1); otherwise an empty denominator
// yields 0 for that ratio and F1 is 0 when p + r == 0.
Prf prf(const ConfusionCounts& counts);

// One-vs-rest counts for `label` between a prediction and a ground truth.
ConfusionCounts confusion(const LabelMap& predicted, const LabelMap& truth, std::uint8_t label);

// Metric classes in report order: detection forged / pristine, then
// distinguishment source / target / pristine.
enum class MetricClass : std::size_t { kForged, kDetPristine, kSource, kTarget, kPristine };
inline constexpr std::size_t kMetricClasses = 5;
std::string_view metric_class_name(MetricClass c);

struct PredictedMasks {
  LabelMap binary;  // 0 pristine, 1 forged
  LabelMap tri;     // 0 pristine, 1 source, 2 target
};

// Per-pixel argmax over channels; ties go to the lower class index.
PredictedMasks predict_masks(const PredictionPair& logits);

// Runs the model on one image. Images whose size differs from the network
// input are resized bilinearly and the maps brought back with
// nearest-neighbour sampling.
PredictedMasks predict_masks(Model& model, const Image& image);

struct ImageMetrics {
  std::uint64_t sample_id = 0;
  std::string attack_tag;
  std::array<Prf, kMetricClasses> classes{};

  const Prf& operator[](MetricClass c) const { return classes[static_cast<std::size_t>(c)]; }
};

ImageMetrics score_image(std::uint64_t sample_id, std::string attack_tag, const PredictedMasks& predicted,
                         const LabelMap& tri_truth);

using MaskPredictor = std::function<PredictedMasks(const LabeledImage&)>;

MaskPredictor model_predictor(Model& model);

// Scores every image in manifest order.
std::vector<ImageMetrics> evaluate_images(const MaskPredictor& predictor, const Dataset& dataset);

// Unweighted mean over images, per metric class.
std::array<Prf, kMetricClasses> mean_metrics(std::span<const ImageMetrics> images);

struct DetectionReport {
  Prf forged;
  Prf pristine;
  std::vector<ImageMetrics> per_image;
};

struct DistinguishmentReport {
  Prf source;
  Prf target;
  Prf pristine;
};

DetectionReport evaluate_detection(const MaskPredictor& predictor, const Dataset& dataset);
DistinguishmentReport evaluate_distinguishment(const MaskPredictor& predictor, const Dataset& dataset);
DistinguishmentReport summarize_distinguishment(std::span<const ImageMetrics> images);

struct CategoryReport {
  std::string attack_tag;
  std::size_t n_images = 0;
  std::size_t n_correct = 0;  // forged-class F1 strictly above the threshold
  std::array<Prf, kMetricClasses> mean{};
};

// Groups by attack tag in order of first appearance.
std::vector<CategoryReport> correct_detection_count(std::span<const ImageMetrics> images, double threshold = 0.5);
std::vector<CategoryReport> correct_detection_count(const MaskPredictor& predictor, const Dataset& dataset,
                                                    double threshold = 0.5);

// Mean of detection forged F1 and distinguishment source, target and pristine
// F1, each averaged over images.
double selection_score(std::span<const ImageMetrics> images);

// CSV: attack_tag,n_images,n_correct,class,precision,recall,f1
void write_category_csv(const std::filesystem::path& path, std::span<const CategoryReport> reports);

// Writes <id>_binary.png (black pristine, white forged) and <id>_tri.png
// (black pristine, green source, red target) per sample.
void export_maps(const MaskPredictor& predictor, const Dataset& dataset, const std::filesystem::path& out_dir);

Image render_binary_map(const LabelMap& binary);
Image render_tri_map(const LabelMap& tri);

}  // namespace cmfd
