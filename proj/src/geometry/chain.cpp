#include "dexhil/geometry/chain.hpp"

namespace dexhil::geometry {

ChainState forward_chain(const KinematicChain& chain, const Eigen::VectorXd& q,
                         const Pose& base) {
  if (static_cast<std::size_t>(q.size()) != chain.size()) {
    throw DimensionError("forward_chain: expected " + std::to_string(chain.size()) +
                         " joint values, got " + std::to_string(q.size()));
  }
  ChainState state;
  state.frames.reserve(chain.size());
  Pose current = base;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const Joint& j = chain.joints[i];
    current = compose(current, j.origin);
    state.frames.push_back(current);
    current.rotation = current.rotation * axis_angle(j.axis, q[static_cast<Eigen::Index>(i)]);
  }
  state.tip = compose(current, chain.tip);
  return state;
}

Eigen::Matrix<double, 6, Eigen::Dynamic> chain_jacobian(const KinematicChain& chain,
                                                        const ChainState& state) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  Eigen::Matrix<double, 6, Eigen::Dynamic> jac(6, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Pose& f = state.frames[static_cast<std::size_t>(i)];
    const Eigen::Vector3d z = f.rotation * chain.joints[static_cast<std::size_t>(i)].axis;
    jac.block<3, 1>(0, i) = z.cross(state.tip.translation - f.translation);
    jac.block<3, 1>(3, i) = z;
  }
  return jac;
}

Eigen::Matrix<double, 3, Eigen::Dynamic> chain_position_jacobian(
    const KinematicChain& chain, const ChainState& state) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  Eigen::Matrix<double, 3, Eigen::Dynamic> jac(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Pose& f = state.frames[static_cast<std::size_t>(i)];
    const Eigen::Vector3d z = f.rotation * chain.joints[static_cast<std::size_t>(i)].axis;
    jac.col(i) = z.cross(state.tip.translation - f.translation);
  }
  return jac;
}

}  // namespace dexhil::geometry
