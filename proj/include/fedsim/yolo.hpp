#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fedsim::yolo {

// Normalized YOLO box: center and size as fractions of image width/height.
struct BBox {
  std::uint32_t class_id = 0;
  double x_center = 0.5;
  double y_center = 0.5;
  double width = 1.0;
  double height = 1.0;

  // Centers in [0,1], sizes in (0,1].
  bool is_valid() const;
  bool operator==(const BBox&) const = default;
};

struct AnnotationRecord {
  std::string image_path;
  std::vector<BBox> boxes;

  std::size_t annotation_count() const { return boxes.size(); }
};

struct CorpusStats {
  std::map<std::uint32_t, std::size_t> class_histogram;
  std::vector<std::pair<double, double>> center_points;
  std::vector<std::pair<double, double>> size_points;

  std::size_t total_boxes() const { return center_points.size(); }
};

// Parses `class_id x_center y_center width height` lines. Blank lines are
// skipped. Throws ParseError with the 1-based line number.
std::vector<BBox> parse_label_file(std::string_view contents);

// Inverse of parse_label_file; fixed-notation shortest round-trip decimals.
std::string serialize_label_file(std::span<const BBox> boxes);

CorpusStats corpus_stats(std::span<const AnnotationRecord> records);

double iou(const BBox& a, const BBox& b);

// Greedy one-to-one matching by descending IoU (ties by prediction index,
// then ground-truth index). A pair is accepted when IoU >= threshold, the
// classes agree, and neither box is already matched. Returns
// matched / max(1, |ground_truth|).
double detection_accuracy(std::span<const BBox> predictions, std::span<const BBox> ground_truth,
                          double iou_threshold);

// `class_id,count` rows in ascending class order.
void write_class_histogram_csv(std::ostream& out, const CorpusStats& stats);
// `x_center,y_center,width,height` rows, one per box.
void write_box_points_csv(std::ostream& out, const CorpusStats& stats);

}  // namespace fedsim::yolo
