#include "slapseg/evalkit/segmenters.hpp"

#include <algorithm>
#include <numeric>

#include "slapseg/common/error.hpp"

namespace slapseg::eval {

int expected_fingers(synth::Hand hand) { return hand == synth::Hand::kThumbs ? 2 : 4; }

img::RigidTransform truth_to_image(const synth::GroundTruth& truth, const img::GrayImage& image) {
  return truth.upright_to_image(image.width(), image.height());
}

Segmenter baseline_segmenter(const base::BaselineParams& params) {
  return {"baseline", [params](const img::GrayImage& image, const synth::SlapRecord&) {
            const base::BaselineResult r = base::baseline_segment(image, params);
            return Segmentation{r.boxes, r.confidence, r.image_to_upright.inverse()};
          }};
}

Segmenter detnet_segmenter(std::string name, std::shared_ptr<const det::ModelParams> params,
                           const det::InferConfig& cfg) {
  if (!params) throw ValidationError("detnet_segmenter needs parameters");
  return {std::move(name), [params, cfg](const img::GrayImage& image, const synth::SlapRecord& rec) {
            double angle = 0.0;
            const base::Binary fg = base::binarize(image);
            if (fg.count() > 0) angle = base::estimate_rotation(fg).angle;
            const det::InferResult r = det::infer(*params, image, angle, cfg);
            // Detections arrive best first.
            const std::size_t keep =
                std::min<std::size_t>(r.detections.size(), static_cast<std::size_t>(expected_fingers(rec.hand)));
            std::vector<std::size_t> order(keep);
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
              return r.detections[a].upright_box.left < r.detections[b].upright_box.left;
            });
            Segmentation s;
            s.frame_to_image = r.image_to_view.inverse();
            for (std::size_t i : order) {
              s.boxes.push_back(r.detections[i].upright_box);
              s.scores.push_back(r.detections[i].score);
            }
            return s;
          }};
}

Segmenter ground_truth_segmenter() {
  return {"ground-truth", [](const img::GrayImage& image, const synth::SlapRecord& rec) {
            return Segmentation{rec.truth.boxes, std::vector<double>(rec.truth.size(), 1.0),
                                truth_to_image(rec.truth, image)};
          }};
}

}  // namespace slapseg::eval
