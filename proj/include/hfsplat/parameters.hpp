// Copyright Contributors to the hfsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "hfsplat/geometry.hpp"

#include <array>
#include <cstddef>

namespace hfs {

/// Flat layout of the 14 optimizable scalars of a Gaussian, in declaration order:
/// position(3), log_scale(3), rotation(4: w x y z), opacity_logit(1), color_logit(3).
inline constexpr std::size_t kParamCount = 14;
using ParamVector = std::array<double, kParamCount>;

enum class ParamGroup { Position, Scale, Rotation, Opacity, Color };

inline constexpr std::size_t kPositionOffset = 0;
inline constexpr std::size_t kScaleOffset = 3;
inline constexpr std::size_t kRotationOffset = 6;
inline constexpr std::size_t kOpacityOffset = 10;
inline constexpr std::size_t kColorOffset = 11;

constexpr ParamGroup group_of(std::size_t i) {
    if (i < kScaleOffset) return ParamGroup::Position;
    if (i < kRotationOffset) return ParamGroup::Scale;
    if (i < kOpacityOffset) return ParamGroup::Rotation;
    if (i < kColorOffset) return ParamGroup::Opacity;
    return ParamGroup::Color;
}

inline ParamVector pack(const Gaussian &g) {
    return {g.position.x,    g.position.y,    g.position.z,    g.log_scale.x,   g.log_scale.y,
            g.log_scale.z,   g.rotation.w,    g.rotation.x,    g.rotation.y,    g.rotation.z,
            g.opacity_logit, g.color_logit.x, g.color_logit.y, g.color_logit.z};
}

inline void unpack(const ParamVector &p, Gaussian &g) {
    g.position = {p[0], p[1], p[2]};
    g.log_scale = {p[3], p[4], p[5]};
    g.rotation = {p[6], p[7], p[8], p[9]};
    g.opacity_logit = p[10];
    g.color_logit = {p[11], p[12], p[13]};
}

} // namespace hfs
