#include <gtest/gtest.h>

#include "sonotrack/kalman.hpp"
#include "sonotrack/rng.hpp"

using namespace sonotrack;

TEST(KalmanInit, MeanAndCovariance) {
  const BBox box{10, 20, 30, 40};  // center (25, 40)
  const KalmanState s = kf_init(box);
  EXPECT_DOUBLE_EQ(s.mean(0), 25.0);
  EXPECT_DOUBLE_EQ(s.mean(1), 40.0);
  EXPECT_DOUBLE_EQ(s.mean(2), 30.0);
  EXPECT_DOUBLE_EQ(s.mean(3), 40.0);
  for (int i = 4; i < 8; ++i) EXPECT_DOUBLE_EQ(s.mean(i), 0.0);
  // position std = init_scale * q_pos * h = 2 * (1/20) * 40 = 4
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(s.cov(i, i), 16.0);
  // velocity std = 10 * q_vel * h = 10 * (1/160) * 40 = 2.5
  for (int i = 4; i < 8; ++i) EXPECT_DOUBLE_EQ(s.cov(i, i), 6.25);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      if (i != j) EXPECT_DOUBLE_EQ(s.cov(i, j), 0.0);
  EXPECT_EQ(s.age, 0);
  EXPECT_THROW(kf_init(BBox{}), std::domain_error);
}

TEST(KalmanPredict, ConstantVelocityAdvancesCenter) {
  KalmanState s = kf_init({0, 0, 10, 10});
  s.mean(4) = 3.0;  // vx
  s.mean(5) = -2.0; // vy
  const auto [next, box] = kf_predict(s);
  EXPECT_DOUBLE_EQ(next.mean(0), 8.0);
  EXPECT_DOUBLE_EQ(next.mean(1), 3.0);
  EXPECT_DOUBLE_EQ(next.mean(2), 10.0);
  EXPECT_DOUBLE_EQ(box.cx(), 8.0);
  EXPECT_DOUBLE_EQ(box.cy(), 3.0);
  EXPECT_EQ(next.age, 1);
  EXPECT_EQ(next.time_since_update, 1);
}

TEST(KalmanPredict, CovarianceGrowsWithoutUpdates) {
  KalmanState s = kf_init({50, 50, 20, 20});
  double prev_trace = s.cov.trace();
  for (int i = 0; i < 10; ++i) {
    s = kf_predict(s).first;
    const double tr = s.cov.trace();
    EXPECT_GT(tr, prev_trace);
    prev_trace = tr;
  }
}

TEST(KalmanUpdate, MovesMeanTowardObservation) {
  KalmanState s = kf_init({0, 0, 10, 10});
  const BBox obs = BBox::from_center(8.0, 5.0, 12.0, 10.0);
  const KalmanState u = kf_update(s, obs);
  // posterior center is strictly between prior (5, 5) and observation (8, 5)
  EXPECT_GT(u.mean(0), 5.0);
  EXPECT_LT(u.mean(0), 8.0);
  EXPECT_DOUBLE_EQ(u.mean(1), 5.0);
  EXPECT_GT(u.mean(2), 10.0);
  EXPECT_LT(u.mean(2), 12.0);
  EXPECT_EQ(u.time_since_update, 0);
  EXPECT_THROW(kf_update(s, BBox{}), std::domain_error);
}

TEST(KalmanUpdate, ExactGainHandComputation) {
  // scalar check on the cx component: prior var P, meas var R,
  // K = P / (P + R), post = prior + K * innovation.
  const BBox init{0, 0, 10, 20};  // h = 20
  KalmanState s = kf_init(init);
  const double P = s.cov(0, 0);        // (2 * 20/20)^2 = 4
  const double R = (20.0 / 20.0) * (20.0 / 20.0);  // 1
  const BBox obs = BBox::from_center(15.0, init.cy(), init.w, init.h);
  const KalmanState u = kf_update(s, obs);
  const double k_gain = P / (P + R);
  EXPECT_NEAR(u.mean(0), 5.0 + k_gain * 10.0, 1e-9);
  EXPECT_NEAR(u.cov(0, 0), (1.0 - k_gain) * P, 1e-9);
}

TEST(KalmanUpdate, ReducesUncertainty) {
  KalmanState s = kf_init({10, 10, 16, 16});
  const auto [pred, box] = kf_predict(s);
  const KalmanState u = kf_update(pred, box);
  for (int i = 0; i < 4; ++i) EXPECT_LT(u.cov(i, i), pred.cov(i, i));
}

TEST(KalmanFilter, CovarianceStaysSymmetricAndPsd) {
  Rng rng(60);
  KalmanState s = kf_init({100, 100, 25, 25});
  for (int t = 0; t < 1000; ++t) {
    s = kf_predict(s).first;
    const BBox obs = BBox::from_center(100 + rng.normal() * 3, 100 + rng.normal() * 3,
                                       25 + rng.normal(), 25 + rng.normal());
    s = kf_update(s, obs);
    for (int i = 0; i < 8; ++i) {
      for (int j = 0; j < 8; ++j) EXPECT_DOUBLE_EQ(s.cov(i, j), s.cov(j, i));
      EXPECT_GE(s.cov(i, i), 0.0);
    }
  }
}

TEST(KalmanFilter, TracksNoiseFreeLinearMotion) {
  // after convergence the one-step prediction should almost coincide with the
  // true box of a constant-velocity target
  const double vx = 2.0, vy = 1.5;
  auto truth = [&](int t) {
    return BBox::from_center(40.0 + vx * t, 40.0 + vy * t, 20.0, 20.0);
  };
  KalmanState s = kf_init(truth(0));
  double last_iou = 0.0;
  for (int t = 1; t <= 25; ++t) {
    const auto [pred, pbox] = kf_predict(s);
    last_iou = iou(pbox, truth(t));
    s = kf_update(pred, truth(t));
  }
  EXPECT_GE(last_iou, 0.95);
}

TEST(KalmanFilter, FollowsSinusoidalMotionApproximately) {
  auto truth = [](int t) {
    return BBox::from_center(50.0 + 2.0 * t, 60.0 + 15.0 * std::sin(0.25 * t),
                             18.0, 18.0);
  };
  KalmanState s = kf_init(truth(0));
  double sum = 0.0;
  int count = 0;
  for (int t = 1; t <= 60; ++t) {
    const auto [pred, pbox] = kf_predict(s);
    if (t > 10) {  // skip the burn-in
      sum += iou(pbox, truth(t));
      ++count;
    }
    s = kf_update(pred, truth(t));
  }
  const double mean_iou = sum / count;
  EXPECT_GT(mean_iou, 0.6);
  EXPECT_LT(mean_iou, 0.98);
}

TEST(KalmanState, BoxClampsDegenerateDims) {
  KalmanState s;
  s.mean << 5, 5, 0.1, -3, 0, 0, 0, 0;
  const BBox b = s.box();
  EXPECT_DOUBLE_EQ(b.w, 1.0);
  EXPECT_DOUBLE_EQ(b.h, 1.0);
  EXPECT_DOUBLE_EQ(b.cx(), 5.0);
}
