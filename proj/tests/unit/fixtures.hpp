#pragma once

#include "dexhil/geometry/arm_model.hpp"
#include "dexhil/geometry/hand_model.hpp"
#include "dexhil/retarget/human_hand.hpp"
#include "dexhil/retarget/retarget_net.hpp"

namespace dexhil::test {

// The retargeting net the sim and pipeline tests drive the hand with. Trained
// once per process (a few seconds).
inline const retarget::RetargetNet& trained_retarget() {
  static const retarget::RetargetNet net = [] {
    const geometry::HandModel hand = geometry::default_desk_hand();
    retarget::RetargetNet n = retarget::make_retarget_net(hand, 1);
    const auto data = retarget::synth_human_dataset(101, 2000);
    retarget::TrainHyper h;
    h.steps = 2500;
    retarget::train_stage1(n, hand, data, {}, h);
    h.steps = 1500;
    retarget::train_stage2(n, hand, data, {}, h);
    return n;
  }();
  return net;
}

inline const geometry::ArmModel& desk_arm() {
  static const geometry::ArmModel a = geometry::default_desk_arm();
  return a;
}

inline const geometry::HandModel& desk_hand() {
  static const geometry::HandModel h = geometry::default_desk_hand();
  return h;
}

}  // namespace dexhil::test
