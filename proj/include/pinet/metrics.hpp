#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pinet/pose.hpp"

namespace pinet::metrics {

/// Least-squares similarity fit s.R.x + t with R orthogonal, det(R) = +1.
struct SimilarityTransform {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Pose apply(const Pose& pose) const;
};

/// Translate pred so its root coincides with the ground-truth root.
Pose root_align(const Pose& pred, const Pose& gt, int root_index = 0);

/// Mean per-joint Euclidean distance after root alignment, millimeters.
double mpjpe(const Pose& pred, const Pose& gt, int root_index = 0);

/// Similarity transform minimizing the summed squared joint distances
/// (centering + cross-covariance SVD, reflection corrected by a sign flip on
/// the smallest singular direction). Throws DegenerateGeometryError when the
/// point set has rank < 2.
std::pair<SimilarityTransform, Pose> procrustes_align(const Pose& pred,
                                                      const Pose& gt);

/// Mean per-joint distance after Procrustes alignment, millimeters.
double pa_mpjpe(const Pose& pred, const Pose& gt);

/// Percentage of joints within threshold (inclusive) after per-pair root
/// alignment, over all poses pooled.
double pck3d(const std::vector<Pose>& preds, const std::vector<Pose>& gts,
             double threshold_mm = 150.0, int root_index = 0);

/// pck3d computed independently per joint index.
std::vector<double> pck_per_joint(const std::vector<Pose>& preds,
                                  const std::vector<Pose>& gts,
                                  double threshold_mm = 150.0,
                                  int root_index = 0);

struct MetricReport {
  double pck_150 = 0.0;     // percent
  double mpjpe_mm = 0.0;
  double pa_mpjpe_mm = 0.0;
  std::vector<double> per_joint_pck;
  long joints_evaluated = 0;
};

MetricReport evaluate(const std::vector<Pose>& preds,
                      const std::vector<Pose>& gts,
                      double threshold_mm = 150.0, int root_index = 0);

/// Serialized form documented in the README (report schema).
std::string report_to_json(const MetricReport& report);

/// Aligned plain-text table, one row per metric plus joint-wise PCK rows.
std::string report_table(const MetricReport& report,
                         const std::string& label = "poses");

}  // namespace pinet::metrics
