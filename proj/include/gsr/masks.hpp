#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <vector>

#include "gsr/scene_io.hpp"
#include "gsr/types.hpp"

namespace gsr {

/// Binary occupancy per pixel (1 = building).
class MaskBitmap {
 public:
  MaskBitmap() = default;
  MaskBitmap(int width, int height, bool fill = false)
      : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool test(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v = true) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  std::size_t count() const;
  bool same_shape(const MaskBitmap& o) const { return width_ == o.width_ && height_ == o.height_; }

  const std::vector<std::uint8_t>& bits() const { return bits_; }
  bool operator==(const MaskBitmap&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

class SegmentLabelMap {
 public:
  SegmentLabelMap() = default;
  SegmentLabelMap(int width, int height, std::int32_t fill = 0)
      : width_(width), height_(height), labels_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::int32_t at(int x, int y) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  void set(int x, int y, std::int32_t label) { labels_[static_cast<std::size_t>(y) * width_ + x] = label; }
  const std::vector<std::int32_t>& labels() const { return labels_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::int32_t> labels_;
};

/// Loads an 8-bit PNG mask (nonzero = building). Throws ShapeError when the
/// size differs from `expected`.
MaskBitmap load_mask(const std::filesystem::path& path, const CameraIntrinsics& expected);
MaskBitmap load_mask(const std::filesystem::path& path);
void save_mask(const std::filesystem::path& path, const MaskBitmap& mask);

/// Loads a 16-bit (or 8-bit) grayscale PNG of fine segment ids.
SegmentLabelMap load_segment_labels(const std::filesystem::path& path, const CameraIntrinsics& expected);
SegmentLabelMap load_segment_labels(const std::filesystem::path& path);
void save_segment_labels(const std::filesystem::path& path, const SegmentLabelMap& labels);

/// Square (Chebyshev radius r) structuring element; pixels outside the image
/// count as background.
MaskBitmap dilate(const MaskBitmap& mask, int radius);
MaskBitmap erode(const MaskBitmap& mask, int radius);

// ---------------------------------------------------------------------------
// Multi-view voting filter

struct PointVotes {
  std::int64_t point_id = 0;
  int in_mask = 0;        // views where the point lands inside the mask
  int unreliability = 0;  // views where it lands in the image but outside the mask
};

/// Vote counts for every scene point over every view. `masks` is aligned
/// with scene.views. Views are processed in parallel; counts are integer
/// reductions and therefore thread-count invariant.
std::vector<PointVotes> count_votes(const SceneBundle& scene, const std::vector<MaskBitmap>& masks);

/// point_id -> in-mask vote count for points with at least one vote.
std::map<std::int64_t, int> find_potential_points(const SceneBundle& scene, const std::vector<MaskBitmap>& masks);

int unreliability_score(const SparsePoint& point, const SceneBundle& scene, const std::vector<MaskBitmap>& masks);

struct ReliablePointSet {
  std::vector<std::int64_t> point_ids;  // ascending
  std::map<std::int64_t, int> scores;   // unreliability score
  std::map<std::int64_t, int> in_mask_counts;

  bool contains(std::int64_t id) const { return scores.count(id) != 0; }
  std::size_t size() const { return point_ids.size(); }
};

inline constexpr double kNoTolerance = std::numeric_limits<double>::infinity();

/// Keeps potential points with score < tau; tau == 0 keeps score == 0 only.
ReliablePointSet filter_reliable_points(const std::vector<PointVotes>& votes, double tau);

/// Union of the fine segments hit by at least `min_hits` reliable-point
/// projections in `view`.
MaskBitmap refine_mask(const ViewRecord& view, const SceneBundle& scene, const ReliablePointSet& reliable,
                       const SegmentLabelMap& segments, int min_hits = 1);

/// Band of pixels straddling the mask edge: dilate(r) XOR erode(r).
MaskBitmap extract_boundary(const MaskBitmap& rbm, int band_radius);

struct RefinedMask {
  MaskBitmap rbm;
  MaskBitmap mb;
};

struct MaskPipelineConfig {
  double tau = 2.0;
  int min_hits = 1;
  int band_radius = 2;
};

struct MaskPipelineResult {
  std::vector<PointVotes> votes;
  ReliablePointSet reliable;
  std::vector<RefinedMask> refined;  // aligned with scene.views
};

MaskPipelineResult run_mask_pipeline(const SceneBundle& scene, const std::vector<MaskBitmap>& coarse,
                                     const std::vector<SegmentLabelMap>& segments,
                                     const MaskPipelineConfig& config);

/// `<dir>/<stem>_rbm.png` and `<dir>/<stem>_mb.png` per view.
void save_refined_masks(const std::filesystem::path& dir, const SceneBundle& scene,
                        const std::vector<RefinedMask>& refined);
std::vector<RefinedMask> load_refined_masks(const std::filesystem::path& dir, const SceneBundle& scene);

/// Reliable points as PLY with `us` and `votes` scalar properties.
void save_reliable_points(const std::filesystem::path& path, const SceneBundle& scene,
                          const ReliablePointSet& reliable);
ReliablePointSet load_reliable_points(const std::filesystem::path& path);

}  // namespace gsr
