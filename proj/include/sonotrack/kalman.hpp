#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <stdexcept>

#include "sonotrack/bbox.hpp"

namespace sonotrack {

// Noise scales as fractions of the box height, SORT-style weighting.
struct KalmanNoise {
  double q_pos = 1.0 / 20.0;   // process std on position/size
  double q_vel = 1.0 / 160.0;  // process std on velocities
  double r_pos = 1.0 / 20.0;   // measurement std
  double init_scale = 2.0;     // initial covariance multiplier
};

// Constant-velocity filter over (cx, cy, w, h) and their velocities.
struct KalmanState {
  Eigen::Matrix<double, 8, 1> mean = Eigen::Matrix<double, 8, 1>::Zero();
  Eigen::Matrix<double, 8, 8> cov = Eigen::Matrix<double, 8, 8>::Zero();
  int age = 0;
  int time_since_update = 0;

  BBox box() const {
    const double w = std::max(1.0, mean(2));
    const double h = std::max(1.0, mean(3));
    return BBox::from_center(mean(0), mean(1), w, h);
  }
};

inline KalmanState kf_init(const BBox& box, const KalmanNoise& n = {}) {
  if (box.is_absent()) throw std::domain_error("kf_init: absent box");
  KalmanState s;
  s.mean << box.cx(), box.cy(), box.w, box.h, 0, 0, 0, 0;
  const double h = std::max(1.0, box.h);
  const double sp = n.init_scale * n.q_pos * h;
  const double sv = 10.0 * n.q_vel * h;
  for (int i = 0; i < 4; ++i) s.cov(i, i) = sp * sp;
  for (int i = 4; i < 8; ++i) s.cov(i, i) = sv * sv;
  return s;
}

inline std::pair<KalmanState, BBox> kf_predict(const KalmanState& s,
                                               const KalmanNoise& n = {}) {
  Eigen::Matrix<double, 8, 8> F = Eigen::Matrix<double, 8, 8>::Identity();
  for (int i = 0; i < 4; ++i) F(i, i + 4) = 1.0;  // unit time step
  const double h = std::max(1.0, s.mean(3));
  Eigen::Matrix<double, 8, 8> Q = Eigen::Matrix<double, 8, 8>::Zero();
  for (int i = 0; i < 4; ++i) Q(i, i) = (n.q_pos * h) * (n.q_pos * h);
  for (int i = 4; i < 8; ++i) Q(i, i) = (n.q_vel * h) * (n.q_vel * h);

  KalmanState out = s;
  out.mean = F * s.mean;
  out.cov = F * s.cov * F.transpose() + Q;
  out.cov = 0.5 * (out.cov + out.cov.transpose().eval());  // keep symmetric
  out.age = s.age + 1;
  out.time_since_update = s.time_since_update + 1;
  return {out, out.box()};
}

inline KalmanState kf_update(const KalmanState& s, const BBox& obs,
                             const KalmanNoise& n = {}) {
  if (obs.is_absent()) throw std::domain_error("kf_update: absent observation");
  Eigen::Matrix<double, 4, 8> H = Eigen::Matrix<double, 4, 8>::Zero();
  for (int i = 0; i < 4; ++i) H(i, i) = 1.0;
  const double h = std::max(1.0, s.mean(3));
  Eigen::Matrix4d R = Eigen::Matrix4d::Identity() * (n.r_pos * h) * (n.r_pos * h);

  Eigen::Vector4d z(obs.cx(), obs.cy(), obs.w, obs.h);
  const Eigen::Vector4d innov = z - H * s.mean;
  const Eigen::Matrix4d S = H * s.cov * H.transpose() + R;
  const Eigen::Matrix<double, 8, 4> K = s.cov * H.transpose() * S.inverse();

  KalmanState out = s;
  out.mean = s.mean + K * innov;
  const Eigen::Matrix<double, 8, 8> I = Eigen::Matrix<double, 8, 8>::Identity();
  out.cov = (I - K * H) * s.cov;
  out.cov = 0.5 * (out.cov + out.cov.transpose().eval());
  out.mean(2) = std::max(1.0, out.mean(2));
  out.mean(3) = std::max(1.0, out.mean(3));
  out.time_since_update = 0;
  return out;
}

}  // namespace sonotrack
