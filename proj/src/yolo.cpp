#include "fedsim/yolo.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>
#include <tuple>

#include "fedsim/error.hpp"
#include "fedsim/format.hpp"

namespace fedsim::yolo {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

double parse_coord(std::string_view tok, const char* field, std::size_t line) {
  double v = 0.0;
  const char* end = tok.data() + tok.size();
  const auto [ptr, ec] = std::from_chars(tok.data(), end, v, std::chars_format::fixed);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(std::string(field) + ": not a decimal number '" + std::string(tok) + "'",
                     line);
  }
  return v;
}

struct Corners {
  double x1, y1, x2, y2;
};

Corners corners(const BBox& b) {
  const double hw = b.width / 2.0;
  const double hh = b.height / 2.0;
  return {b.x_center - hw, b.y_center - hh, b.x_center + hw, b.y_center + hh};
}

}  // namespace

bool BBox::is_valid() const {
  return x_center >= 0.0 && x_center <= 1.0 && y_center >= 0.0 && y_center <= 1.0 &&
         width > 0.0 && width <= 1.0 && height > 0.0 && height <= 1.0;
}

std::vector<BBox> parse_label_file(std::string_view contents) {
  std::vector<BBox> boxes;
  std::size_t line_no = 0;
  while (!contents.empty()) {
    ++line_no;
    const auto nl = contents.find('\n');
    const std::string_view line = contents.substr(0, nl);
    contents = nl == std::string_view::npos ? std::string_view{} : contents.substr(nl + 1);

    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != 5) {
      throw ParseError("expected 5 fields, found " + std::to_string(fields.size()), line_no);
    }

    BBox box;
    const char* cend = fields[0].data() + fields[0].size();
    const auto [ptr, ec] = std::from_chars(fields[0].data(), cend, box.class_id);
    if (ec != std::errc() || ptr != cend) {
      throw ParseError("class_id: not a non-negative integer '" + std::string(fields[0]) + "'",
                       line_no);
    }
    box.x_center = parse_coord(fields[1], "x_center", line_no);
    box.y_center = parse_coord(fields[2], "y_center", line_no);
    box.width = parse_coord(fields[3], "width", line_no);
    box.height = parse_coord(fields[4], "height", line_no);

    if (!(box.x_center >= 0.0 && box.x_center <= 1.0)) {
      throw ParseError("x_center out of range [0,1]", line_no);
    }
    if (!(box.y_center >= 0.0 && box.y_center <= 1.0)) {
      throw ParseError("y_center out of range [0,1]", line_no);
    }
    if (!(box.width > 0.0 && box.width <= 1.0)) {
      throw ParseError("width out of range (0,1]", line_no);
    }
    if (!(box.height > 0.0 && box.height <= 1.0)) {
      throw ParseError("height out of range (0,1]", line_no);
    }
    boxes.push_back(box);
  }
  return boxes;
}

std::string serialize_label_file(std::span<const BBox> boxes) {
  std::string out;
  for (const auto& b : boxes) {
    out += std::to_string(b.class_id);
    for (double v : {b.x_center, b.y_center, b.width, b.height}) {
      out += ' ';
      out += format_fixed(v);
    }
    out += '\n';
  }
  return out;
}

CorpusStats corpus_stats(std::span<const AnnotationRecord> records) {
  CorpusStats stats;
  for (const auto& rec : records) {
    for (const auto& b : rec.boxes) {
      ++stats.class_histogram[b.class_id];
      stats.center_points.emplace_back(b.x_center, b.y_center);
      stats.size_points.emplace_back(b.width, b.height);
    }
  }
  return stats;
}

double iou(const BBox& a, const BBox& b) {
  const Corners ca = corners(a);
  const Corners cb = corners(b);
  const double iw = std::min(ca.x2, cb.x2) - std::max(ca.x1, cb.x1);
  const double ih = std::min(ca.y2, cb.y2) - std::max(ca.y1, cb.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double area_a = (ca.x2 - ca.x1) * (ca.y2 - ca.y1);
  const double area_b = (cb.x2 - cb.x1) * (cb.y2 - cb.y1);
  return std::clamp(inter / (area_a + area_b - inter), 0.0, 1.0);
}

double detection_accuracy(std::span<const BBox> predictions, std::span<const BBox> ground_truth,
                          double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw ContractError("iou_threshold must lie in (0, 1]");
  }
  struct Candidate {
    double overlap;
    std::size_t pred;
    std::size_t gt;
  };
  std::vector<Candidate> candidates;
  for (std::size_t p = 0; p < predictions.size(); ++p) {
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      if (predictions[p].class_id != ground_truth[g].class_id) continue;
      const double o = iou(predictions[p], ground_truth[g]);
      if (o >= iou_threshold) candidates.push_back({o, p, g});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(b.overlap, a.pred, a.gt) < std::tie(a.overlap, b.pred, b.gt);
  });

  std::vector<bool> pred_used(predictions.size(), false);
  std::vector<bool> gt_used(ground_truth.size(), false);
  std::size_t matched = 0;
  for (const auto& c : candidates) {
    if (pred_used[c.pred] || gt_used[c.gt]) continue;
    pred_used[c.pred] = true;
    gt_used[c.gt] = true;
    ++matched;
  }
  return static_cast<double>(matched) /
         static_cast<double>(std::max<std::size_t>(1, ground_truth.size()));
}

void write_class_histogram_csv(std::ostream& out, const CorpusStats& stats) {
  out << "class_id,count\n";
  for (const auto& [cls, count] : stats.class_histogram) out << cls << ',' << count << '\n';
}

void write_box_points_csv(std::ostream& out, const CorpusStats& stats) {
  out << "x_center,y_center,width,height\n";
  for (std::size_t i = 0; i < stats.center_points.size(); ++i) {
    out << format_shortest(stats.center_points[i].first) << ','
        << format_shortest(stats.center_points[i].second) << ','
        << format_shortest(stats.size_points[i].first) << ','
        << format_shortest(stats.size_points[i].second) << '\n';
  }
}

}  // namespace fedsim::yolo
