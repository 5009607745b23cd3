#include "pinet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

namespace pinet::metrics {

namespace {

void require_pairs(const std::vector<Pose>& preds, const std::vector<Pose>& gts) {
  if (preds.size() != gts.size())
    throw std::invalid_argument("metrics: prediction/ground-truth count mismatch (" +
                                std::to_string(preds.size()) + " vs " +
                                std::to_string(gts.size()) + ")");
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i].joint_count() != gts[i].joint_count())
      throw ShapeError("metrics: joint count mismatch at pose " + std::to_string(i));
}

}  // namespace

Pose SimilarityTransform::apply(const Pose& pose) const {
  Pose out;
  out.joints = (scale * (rotation * pose.joints.transpose())).transpose();
  out.joints.rowwise() += translation.transpose();
  return out;
}

Pose root_align(const Pose& pred, const Pose& gt, int root_index) {
  if (pred.joint_count() != gt.joint_count())
    throw ShapeError("root_align: joint count mismatch");
  const Vec3 shift = root_of(gt, root_index) - root_of(pred, root_index);
  Pose out = pred;
  out.joints.rowwise() += shift.transpose();
  return out;
}

double mpjpe(const Pose& pred, const Pose& gt, int root_index) {
  const Pose aligned = root_align(pred, gt, root_index);
  return (aligned.joints - gt.joints).rowwise().norm().mean();
}

std::pair<SimilarityTransform, Pose> procrustes_align(const Pose& pred,
                                                      const Pose& gt) {
  const int joints = pred.joint_count();
  if (gt.joint_count() != joints)
    throw ShapeError("procrustes_align: joint count mismatch");
  if (joints < 3)
    throw std::invalid_argument("procrustes_align: needs at least 3 joints");

  const Eigen::RowVector3d mu_p = pred.joints.colwise().mean();
  const Eigen::RowVector3d mu_g = gt.joints.colwise().mean();
  const Mat P = pred.joints.rowwise() - mu_p;
  const Mat G = gt.joints.rowwise() - mu_g;

  const double var_p = P.squaredNorm();
  if (var_p <= 0.0)
    throw DegenerateGeometryError("procrustes_align: prediction joints coincide");

  const Mat3 cov = G.transpose() * P;  // 3x3 cross-covariance
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sigma = svd.singularValues();
  if (sigma(1) <= 1e-12 * std::max(sigma(0), 1e-300))
    throw DegenerateGeometryError(
        "procrustes_align: point set rank < 2, rotation underdetermined");

  Vec3 signs = Vec3::Ones();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0)
    signs(2) = -1.0;  // flip the smallest singular direction

  SimilarityTransform t;
  t.rotation = svd.matrixU() * signs.asDiagonal() * svd.matrixV().transpose();
  t.scale = sigma.dot(signs) / var_p;
  t.translation = mu_g.transpose() - t.scale * (t.rotation * mu_p.transpose());

  return {t, t.apply(pred)};
}

double pa_mpjpe(const Pose& pred, const Pose& gt) {
  const auto [transform, aligned] = procrustes_align(pred, gt);
  return (aligned.joints - gt.joints).rowwise().norm().mean();
}

double pck3d(const std::vector<Pose>& preds, const std::vector<Pose>& gts,
             double threshold_mm, int root_index) {
  require_pairs(preds, gts);
  long correct = 0, total = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const Pose aligned = root_align(preds[i], gts[i], root_index);
    for (int j = 0; j < aligned.joint_count(); ++j) {
      const double d = (aligned.joints.row(j) - gts[i].joints.row(j)).norm();
      if (d <= threshold_mm) ++correct;
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("pck3d: no joints to evaluate");
  return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<double> pck_per_joint(const std::vector<Pose>& preds,
                                  const std::vector<Pose>& gts,
                                  double threshold_mm, int root_index) {
  require_pairs(preds, gts);
  if (preds.empty())
    throw std::invalid_argument("pck_per_joint: no poses to evaluate");
  const int joints = preds.front().joint_count();
  std::vector<long> correct(static_cast<std::size_t>(joints), 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const Pose aligned = root_align(preds[i], gts[i], root_index);
    for (int j = 0; j < joints; ++j) {
      const double d = (aligned.joints.row(j) - gts[i].joints.row(j)).norm();
      if (d <= threshold_mm) ++correct[static_cast<std::size_t>(j)];
    }
  }
  std::vector<double> out(static_cast<std::size_t>(joints));
  for (int j = 0; j < joints; ++j)
    out[static_cast<std::size_t>(j)] =
        100.0 * static_cast<double>(correct[static_cast<std::size_t>(j)]) /
        static_cast<double>(preds.size());
  return out;
}

MetricReport evaluate(const std::vector<Pose>& preds,
                      const std::vector<Pose>& gts, double threshold_mm,
                      int root_index) {
  require_pairs(preds, gts);
  if (preds.empty()) throw std::invalid_argument("evaluate: no poses");

  MetricReport report;
  double mpjpe_sum = 0.0, pa_sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    mpjpe_sum += mpjpe(preds[i], gts[i], root_index);
    pa_sum += pa_mpjpe(preds[i], gts[i]);
  }
  report.mpjpe_mm = mpjpe_sum / static_cast<double>(preds.size());
  report.pa_mpjpe_mm = pa_sum / static_cast<double>(preds.size());
  report.pck_150 = pck3d(preds, gts, threshold_mm, root_index);
  report.per_joint_pck = pck_per_joint(preds, gts, threshold_mm, root_index);
  report.joints_evaluated =
      static_cast<long>(preds.size()) * preds.front().joint_count();
  return report;
}

std::string report_to_json(const MetricReport& report) {
  nlohmann::json j;
  j["pck_150"] = report.pck_150;
  j["mpjpe_mm"] = report.mpjpe_mm;
  j["pa_mpjpe_mm"] = report.pa_mpjpe_mm;
  j["per_joint_pck"] = report.per_joint_pck;
  j["joints_evaluated"] = report.joints_evaluated;
  return j.dump(2);
}

std::string report_table(const MetricReport& report, const std::string& label) {
  std::ostringstream out;
  char line[96];
  std::snprintf(line, sizeof(line), "%-24s %12s\n", ("metric (" + label + ")").c_str(),
                "value");
  out << line << std::string(37, '-') << "\n";
  std::snprintf(line, sizeof(line), "%-24s %12.3f\n", "3DPCK@150mm (%)",
                report.pck_150);
  out << line;
  std::snprintf(line, sizeof(line), "%-24s %12.3f\n", "MPJPE (mm)", report.mpjpe_mm);
  out << line;
  std::snprintf(line, sizeof(line), "%-24s %12.3f\n", "PA-MPJPE (mm)",
                report.pa_mpjpe_mm);
  out << line;
  std::snprintf(line, sizeof(line), "%-24s %12ld\n", "joints evaluated",
                report.joints_evaluated);
  out << line;
  out << "joint-wise 3DPCK (%):\n";
  for (std::size_t j = 0; j < report.per_joint_pck.size(); ++j) {
    std::snprintf(line, sizeof(line), "  joint %-17zu %12.3f\n", j,
                  report.per_joint_pck[j]);
    out << line;
  }
  return out.str();
}

}  // namespace pinet::metrics
