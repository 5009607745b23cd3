#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pinet/metrics.hpp"
#include "test_helpers.hpp"

using namespace pinet;
using namespace pinet::metrics;

namespace {

Mat3 random_rotation(Rng& rng) {
  // Uniform random unit quaternion.
  Eigen::Vector4d q;
  for (int i = 0; i < 4; ++i) q(i) = rng.normal();
  q.normalize();
  const double w = q(0), x = q(1), y = q(2), z = q(3);
  Mat3 rot;
  rot << w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z;
  return rot;
}

Pose transformed(const Pose& pose, double scale, const Mat3& rot, const Vec3& t) {
  Pose out;
  out.joints = (scale * (rot * pose.joints.transpose())).transpose();
  out.joints.rowwise() += t.transpose();
  return out;
}

}  // namespace

TEST_CASE("root_align: identity, offset removal, random roots coincide") {
  Rng rng(40);
  const Pose gt = testutil::random_pose(rng);

  const Pose same = root_align(gt, gt);
  CHECK((same.joints - gt.joints).cwiseAbs().maxCoeff() == 0.0);

  Pose offset = gt;
  offset.joints.rowwise() += Eigen::RowVector3d(120.0, -40.0, 310.0);
  const Pose aligned = root_align(offset, gt);
  CHECK((aligned.joints - gt.joints).cwiseAbs().maxCoeff() < 1e-9);

  for (int trial = 0; trial < 20; ++trial) {
    const Pose pred = testutil::random_pose(rng);
    const Pose target = testutil::random_pose(rng);
    const Pose a = root_align(pred, target);
    CHECK((root_of(a) - root_of(target)).cwiseAbs().maxCoeff() < 1e-12 * 4000.0);
  }
}

TEST_CASE("mpjpe: zero, single displaced joint, loop oracle") {
  Rng rng(41);
  const Pose gt = testutil::random_pose(rng);
  CHECK(mpjpe(gt, gt) == 0.0);

  Pose pred = gt;
  pred.joints(5, 0) += 34.0;  // one joint displaced 34 mm
  CHECK(mpjpe(pred, gt) == doctest::Approx(2.0).epsilon(1e-12));

  for (int trial = 0; trial < 100; ++trial) {
    const Pose a = testutil::random_pose(rng);
    const Pose b = testutil::random_pose(rng);
    // loop oracle after root alignment
    const Vec3 shift = root_of(b) - root_of(a);
    double sum = 0.0;
    for (int j = 0; j < a.joint_count(); ++j) {
      double sq = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double d = a.joints(j, c) + shift(c) - b.joints(j, c);
        sq += d * d;
      }
      sum += std::sqrt(sq);
    }
    const double want = sum / a.joint_count();
    CHECK(mpjpe(a, b) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("mpjpe is invariant to common translations") {
  Rng rng(42);
  const Pose pred = testutil::random_pose(rng);
  const Pose gt = testutil::random_pose(rng);
  const double base = mpjpe(pred, gt);
  for (int trial = 0; trial < 10; ++trial) {
    Pose moved = pred;
    moved.joints.rowwise() += Eigen::RowVector3d(rng.normal(0, 500), rng.normal(0, 500),
                                                 rng.normal(0, 500));
    CHECK(mpjpe(moved, gt) == doctest::Approx(base).epsilon(1e-9));
    Pose moved_gt = gt;
    moved_gt.joints.rowwise() += Eigen::RowVector3d(
        rng.normal(0, 500), rng.normal(0, 500), rng.normal(0, 500));
    CHECK(mpjpe(pred, moved_gt) == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("procrustes_align: identity, constructed similarity, mirror, degenerate") {
  Rng rng(43);
  const Pose gt = testutil::random_pose(rng, 17, 400.0, 0.0);

  SUBCASE("pred == gt recovers the identity transform") {
    const auto [t, aligned] = procrustes_align(gt, gt);
    CHECK(t.scale == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((t.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(t.translation.cwiseAbs().maxCoeff() < 1e-9);
    CHECK((aligned.joints - gt.joints).cwiseAbs().maxCoeff() < 1e-9);
  }

  SUBCASE("pred = 2 R0 gt + t0 is aligned back onto gt") {
    for (int trial = 0; trial < 25; ++trial) {
      const Mat3 rot = random_rotation(rng);
      const Vec3 shift(rng.normal(0, 800), rng.normal(0, 800), rng.normal(0, 800));
      const Pose pred = transformed(gt, 2.0, rot, shift);
      const auto [t, aligned] = procrustes_align(pred, gt);
      CHECK((aligned.joints - gt.joints).cwiseAbs().maxCoeff() < 1e-9 * 800.0);
      // Recovered transform inverts the construction.
      CHECK(t.scale == doctest::Approx(0.5).epsilon(1e-9));
      CHECK((t.rotation * rot - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
      // Orthogonality and determinant contract.
      CHECK((t.rotation.transpose() * t.rotation - Mat3::Identity())
                .cwiseAbs()
                .maxCoeff() < 1e-9);
      CHECK(t.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  SUBCASE("mirrored gt still yields det +1 and a nonzero residual") {
    Pose mirrored = gt;
    mirrored.joints.col(0) *= -1.0;
    const auto [t, aligned] = procrustes_align(mirrored, gt);
    CHECK(t.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK((aligned.joints - gt.joints).rowwise().norm().mean() > 1.0);
  }

  SUBCASE("rank-deficient point sets are a distinct error") {
    Mat line(17, 3);
    for (int j = 0; j < 17; ++j) line.row(j) << j * 50.0, 0.0, 0.0;
    CHECK_THROWS_AS(procrustes_align(Pose(line), gt), DegenerateGeometryError);

    const Mat coincident = Mat::Constant(17, 3, 25.0);
    CHECK_THROWS_AS(procrustes_align(Pose(coincident), gt),
                    DegenerateGeometryError);
  }
}

TEST_CASE("pa_mpjpe: similarity invariance and the grid-search oracle") {
  Rng rng(44);
  const Pose gt = testutil::random_pose(rng, 17, 400.0, 0.0);

  // Rigidly rotated copy: zero error.
  const Pose rotated = transformed(gt, 1.0, random_rotation(rng), Vec3(10, 20, 30));
  CHECK(pa_mpjpe(rotated, gt) < 1e-9);

  // Scaled copy: similarity includes scale.
  CHECK(pa_mpjpe(transformed(gt, 1.1, Mat3::Identity(), Vec3::Zero()), gt) < 1e-9);

  // Noisy poses against the independent quaternion + scale-grid oracle.
  for (int trial = 0; trial < 30; ++trial) {
    const Pose pred = Pose(gt.joints + testutil::random_mat(rng, 17, 3, 60.0));
    const double got = pa_mpjpe(pred, gt);
    const double want = oracles::pa_mpjpe_ref(pred, gt);
    CHECK(got == doctest::Approx(want).epsilon(1e-3));  // 0.1% relative
  }
}

TEST_CASE("pa_mpjpe never exceeds mpjpe (larger alignment class)") {
  Rng rng(45);
  for (int trial = 0; trial < 100; ++trial) {
    const Pose gt = testutil::random_pose(rng);
    const Pose pred = Pose(gt.joints + testutil::random_mat(rng, 17, 3, 80.0));
    CHECK(pa_mpjpe(pred, gt) <= mpjpe(pred, gt) + 1e-9);
  }
}

TEST_CASE("pa_mpjpe is invariant to similarity transforms of pred") {
  Rng rng(46);
  const Pose gt = testutil::random_pose(rng, 17, 400.0, 0.0);
  const Pose pred = Pose(gt.joints + testutil::random_mat(rng, 17, 3, 50.0));
  const double base = pa_mpjpe(pred, gt);
  for (int trial = 0; trial < 30; ++trial) {
    const double scale = std::exp(rng.uniform(-1.0, 1.0));
    const Pose moved = transformed(pred, scale, random_rotation(rng),
                                   Vec3(rng.normal(0, 900), rng.normal(0, 900),
                                        rng.normal(0, 900)));
    CHECK(pa_mpjpe(moved, gt) == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("pck3d: exact, inclusive boundary, 151 mm case, mismatch") {
  Rng rng(47);
  std::vector<Pose> gts, preds;
  for (int i = 0; i < 3; ++i) gts.push_back(testutil::random_pose(rng));
  preds = gts;
  CHECK(pck3d(preds, gts) == 100.0);

  // Joint at exactly threshold counts as correct.
  preds[0].joints(4, 0) += 150.0;
  CHECK(pck3d({preds[0]}, {gts[0]}) == 100.0);

  // 151 mm misses: 16/17 joints correct.
  Pose over = gts[0];
  over.joints(4, 0) += 151.0;
  CHECK(pck3d({over}, {gts[0]}) == doctest::Approx(100.0 * 16.0 / 17.0).epsilon(1e-9));
  CHECK(pck3d({over}, {gts[0]}) == doctest::Approx(94.118).epsilon(1e-4));

  CHECK_THROWS_AS(pck3d(preds, std::vector<Pose>(gts.begin(), gts.begin() + 2)),
                  std::invalid_argument);
}

TEST_CASE("pck3d is monotone in the threshold") {
  Rng rng(48);
  std::vector<Pose> gts, preds;
  for (int i = 0; i < 10; ++i) {
    gts.push_back(testutil::random_pose(rng));
    preds.push_back(Pose(gts.back().joints + testutil::random_mat(rng, 17, 3, 90.0)));
  }
  double prev = 0.0;
  for (double threshold : {10.0, 50.0, 100.0, 150.0, 250.0, 500.0}) {
    const double pck = pck3d(preds, gts, threshold);
    CHECK(pck >= prev);
    prev = pck;
  }
}

TEST_CASE("pck_per_joint: exact, corrupted joint, mean equals pooled pck") {
  Rng rng(49);
  std::vector<Pose> gts, preds;
  for (int i = 0; i < 5; ++i) gts.push_back(testutil::random_pose(rng));
  preds = gts;

  auto per_joint = pck_per_joint(preds, gts);
  REQUIRE(per_joint.size() == 17);
  for (double v : per_joint) CHECK(v == 100.0);

  // Corrupt only joint 5 beyond threshold everywhere.
  for (Pose& p : preds) p.joints(5, 1) += 400.0;
  per_joint = pck_per_joint(preds, gts);
  CHECK(per_joint[5] == 0.0);
  for (int j = 0; j < 17; ++j)
    if (j != 5) CHECK(per_joint[static_cast<std::size_t>(j)] == 100.0);

  // Equal joint counts: the joint mean equals the pooled percentage.
  for (std::size_t i = 0; i < preds.size(); ++i)
    preds[i].joints += testutil::random_mat(rng, 17, 3, 80.0);
  per_joint = pck_per_joint(preds, gts);
  double mean = 0.0;
  for (double v : per_joint) mean += v;
  mean /= static_cast<double>(per_joint.size());
  CHECK(mean == doctest::Approx(pck3d(preds, gts)).epsilon(1e-12));
}

TEST_CASE("evaluate produces a consistent report with valid JSON") {
  Rng rng(50);
  std::vector<Pose> gts, preds;
  for (int i = 0; i < 4; ++i) {
    gts.push_back(testutil::random_pose(rng));
    preds.push_back(Pose(gts.back().joints + testutil::random_mat(rng, 17, 3, 40.0)));
  }
  const MetricReport report = evaluate(preds, gts);
  CHECK(report.joints_evaluated == 4 * 17);
  CHECK(report.pck_150 >= 0.0);
  CHECK(report.pck_150 <= 100.0);
  CHECK(report.mpjpe_mm >= 0.0);
  CHECK(report.pa_mpjpe_mm <= report.mpjpe_mm + 1e-9);
  CHECK(report.per_joint_pck.size() == 17);

  const std::string json_text = report_to_json(report);
  CHECK(json_text.find("\"pck_150\"") != std::string::npos);
  CHECK(json_text.find("\"mpjpe_mm\"") != std::string::npos);
  CHECK(json_text.find("\"pa_mpjpe_mm\"") != std::string::npos);
  CHECK(json_text.find("\"per_joint_pck\"") != std::string::npos);
  CHECK(json_text.find("\"joints_evaluated\"") != std::string::npos);

  const std::string table = report_table(report, "test");
  CHECK(table.find("MPJPE") != std::string::npos);
  CHECK(table.find("3DPCK@150mm") != std::string::npos);
}
