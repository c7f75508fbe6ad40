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

#include "cmfd/evaluation.hpp"

#include <cstdio>
#include <fstream>
#include <map>

#include "cmfd/error.hpp"
#include "cmfd/forgery_data.hpp"

namespace cmfd {

namespace fs = std::filesystem;

Prf prf(const ConfusionCounts& c) {
  if (c.tp + c.fp + c.fn == 0) return {1.0, 1.0, 1.0};
  Prf out;
  out.precision = (c.tp + c.fp) == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  out.recall = (c.tp + c.fn) == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  const double sum = out.precision + out.recall;
  out.f1 = sum == 0.0 ? 0.0 : 2.0 * out.precision * out.recall / sum;
  return out;
}

ConfusionCounts confusion(const LabelMap& predicted, const LabelMap& truth, std::uint8_t label) {
  if (predicted.height != truth.height || predicted.width != truth.width)
    throw ShapeError("prediction and ground truth sizes differ");
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predicted.labels[i] == label;
    const bool t = truth.labels[i] == label;
    if (p && t)
      ++c.tp;
    else if (p)
      ++c.fp;
    else if (t)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

std::string_view metric_class_name(MetricClass c) {
  switch (c) {
    case MetricClass::kForged:
      return "forged";
    case MetricClass::kDetPristine:
      return "det_pristine";
    case MetricClass::kSource:
      return "source";
    case MetricClass::kTarget:
      return "target";
    case MetricClass::kPristine:
      return "pristine";
  }
  return "?";
}

PredictedMasks predict_masks(const PredictionPair& logits) {
  const auto argmax = [](const Tensor& t) {
    const std::size_t classes = t.dim(0), h = t.dim(1), w = t.dim(2), hw = h * w;
    LabelMap out(h, w);
    for (std::size_t i = 0; i < hw; ++i) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < classes; ++k)
        if (t[k * hw + i] > t[best * hw + i]) best = k;
      out.labels[i] = static_cast<std::uint8_t>(best);
    }
    return out;
  };
  return {argmax(logits.det_logits), argmax(logits.dist_logits)};
}

PredictedMasks predict_masks(Model& model, const Image& image) {
  const std::size_t side = model.config().input_size;
  const bool resize = image.height != side || image.width != side;
  const Image input = resize ? resize_bilinear(image, side, side) : image;
  PredictedMasks masks = predict_masks(model.forward(image_to_tensor(input)));
  if (resize) {
    masks.binary = resize_nearest(masks.binary, image.height, image.width);
    masks.tri = resize_nearest(masks.tri, image.height, image.width);
  }
  return masks;
}

ImageMetrics score_image(std::uint64_t sample_id, std::string attack_tag, const PredictedMasks& predicted,
                         const LabelMap& tri_truth) {
  const LabelMap truth_binary = binary_mask(tri_truth);
  ImageMetrics m;
  m.sample_id = sample_id;
  m.attack_tag = std::move(attack_tag);
  m.classes[0] = prf(confusion(predicted.binary, truth_binary, 1));
  m.classes[1] = prf(confusion(predicted.binary, truth_binary, 0));
  m.classes[2] = prf(confusion(predicted.tri, tri_truth, kSource));
  m.classes[3] = prf(confusion(predicted.tri, tri_truth, kTarget));
  m.classes[4] = prf(confusion(predicted.tri, tri_truth, kPristine));
  return m;
}

MaskPredictor model_predictor(Model& model) {
  return [&model](const LabeledImage& sample) { return predict_masks(model, sample.image); };
}

std::vector<ImageMetrics> evaluate_images(const MaskPredictor& predictor, const Dataset& dataset) {
  if (dataset.size() == 0) throw DatasetError("cannot evaluate an empty dataset");
  std::vector<ImageMetrics> out;
  out.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const LabeledImage sample = dataset.load(i);
    out.push_back(score_image(sample.sample_id, sample.attack_tag, predictor(sample), sample.tri_mask));
  }
  return out;
}

std::array<Prf, kMetricClasses> mean_metrics(std::span<const ImageMetrics> images) {
  std::array<Prf, kMetricClasses> mean{};
  if (images.empty()) return mean;
  for (const ImageMetrics& m : images)
    for (std::size_t k = 0; k < kMetricClasses; ++k) {
      mean[k].precision += m.classes[k].precision;
      mean[k].recall += m.classes[k].recall;
      mean[k].f1 += m.classes[k].f1;
    }
  const auto n = static_cast<double>(images.size());
  for (Prf& p : mean) {
    p.precision /= n;
    p.recall /= n;
    p.f1 /= n;
  }
  return mean;
}

DetectionReport evaluate_detection(const MaskPredictor& predictor, const Dataset& dataset) {
  DetectionReport report;
  report.per_image = evaluate_images(predictor, dataset);
  const auto mean = mean_metrics(report.per_image);
  report.forged = mean[0];
  report.pristine = mean[1];
  return report;
}

DistinguishmentReport summarize_distinguishment(std::span<const ImageMetrics> images) {
  const auto mean = mean_metrics(images);
  return {mean[2], mean[3], mean[4]};
}

DistinguishmentReport evaluate_distinguishment(const MaskPredictor& predictor, const Dataset& dataset) {
  return summarize_distinguishment(evaluate_images(predictor, dataset));
}

std::vector<CategoryReport> correct_detection_count(std::span<const ImageMetrics> images, double threshold) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<ImageMetrics>> groups;
  for (const ImageMetrics& m : images) {
    auto [it, inserted] = groups.try_emplace(m.attack_tag);
    if (inserted) order.push_back(m.attack_tag);
    it->second.push_back(m);
  }
  std::vector<CategoryReport> reports;
  for (const std::string& tag : order) {
    const auto& group = groups.at(tag);
    CategoryReport r;
    r.attack_tag = tag;
    r.n_images = group.size();
    for (const ImageMetrics& m : group)
      if (m[MetricClass::kForged].f1 > threshold) ++r.n_correct;
    r.mean = mean_metrics(group);
    reports.push_back(std::move(r));
  }
  return reports;
}

std::vector<CategoryReport> correct_detection_count(const MaskPredictor& predictor, const Dataset& dataset,
                                                    double threshold) {
  return correct_detection_count(evaluate_images(predictor, dataset), threshold);
}

double selection_score(std::span<const ImageMetrics> images) {
  const auto mean = mean_metrics(images);
  return (mean[0].f1 + mean[2].f1 + mean[3].f1 + mean[4].f1) / 4.0;
}

void write_category_csv(const fs::path& path, std::span<const CategoryReport> reports) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "attack_tag,n_images,n_correct,class,precision,recall,f1\n";
  char buf[160];
  for (const CategoryReport& r : reports)
    for (std::size_t k = 0; k < kMetricClasses; ++k) {
      std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g", r.mean[k].precision, r.mean[k].recall, r.mean[k].f1);
      out << r.attack_tag << ',' << r.n_images << ',' << r.n_correct << ','
          << metric_class_name(static_cast<MetricClass>(k)) << ',' << buf << '\n';
    }
  if (!out) throw IoError("failed writing " + path.string());
}

Image render_binary_map(const LabelMap& binary) {
  Image out(binary.height, binary.width);
  for (std::size_t i = 0; i < binary.size(); ++i) {
    const std::uint8_t v = binary.labels[i] ? 255 : 0;
    out.pixels[3 * i] = out.pixels[3 * i + 1] = out.pixels[3 * i + 2] = v;
  }
  return out;
}

Image render_tri_map(const LabelMap& tri) {
  Image out(tri.height, tri.width);
  for (std::size_t i = 0; i < tri.size(); ++i) {
    if (tri.labels[i] == kSource) out.pixels[3 * i + 1] = 255;
    if (tri.labels[i] == kTarget) out.pixels[3 * i] = 255;
  }
  return out;
}

void export_maps(const MaskPredictor& predictor, const Dataset& dataset, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const LabeledImage sample = dataset.load(i);
    const PredictedMasks masks = predictor(sample);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "%06llu", static_cast<unsigned long long>(sample.sample_id));
    write_png_gray(out_dir / (std::string(stem) + "_binary.png"), [&] {
      LabelMap m = masks.binary;
      for (auto& v : m.labels) v = v ? 255 : 0;
      return m;
    }());
    write_png_rgb(out_dir / (std::string(stem) + "_tri.png"), render_tri_map(masks.tri));
  }
}

}  // namespace cmfd
