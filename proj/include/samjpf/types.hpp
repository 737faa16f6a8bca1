#ifndef SAMJPF_TYPES_HPP
#define SAMJPF_TYPES_HPP

#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

#include "samjpf/error.hpp"

namespace samjpf {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;
using Mat42 = Eigen::Matrix<double, 4, 2>;

/// Sensor channels recorded on each vehicle.
enum class Channel { X, Y, Steering, Velocity, Power };

inline constexpr std::array<Channel, 5> kAllChannels = {Channel::X, Channel::Y, Channel::Steering,
                                                        Channel::Velocity, Channel::Power};

inline std::string_view channel_name(Channel c) {
    switch (c) {
    case Channel::X: return "x";
    case Channel::Y: return "y";
    case Channel::Steering: return "steering";
    case Channel::Velocity: return "velocity";
    case Channel::Power: return "power";
    }
    return "?";
}

inline Channel parse_channel(std::string_view name) {
    for (Channel c : kAllChannels) {
        if (channel_name(c) == name) return c;
    }
    throw SchemaError("unknown channel '" + std::string(name) + "'");
}

/// A 2-D sensor pairing. The tag fixes the channel pair.
enum class Modality { XY, SV, SP, VP };

inline constexpr std::array<Modality, 4> kAllModalities = {Modality::XY, Modality::SV, Modality::SP,
                                                           Modality::VP};

inline std::string_view modality_name(Modality m) {
    switch (m) {
    case Modality::XY: return "XY";
    case Modality::SV: return "SV";
    case Modality::SP: return "SP";
    case Modality::VP: return "VP";
    }
    return "?";
}

inline Modality parse_modality(std::string_view tag) {
    std::string up(tag);
    for (auto& ch : up) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    for (Modality m : kAllModalities) {
        if (modality_name(m) == up) return m;
    }
    throw SchemaError("unknown modality '" + std::string(tag) + "'");
}

inline std::pair<Channel, Channel> channel_pair(Modality m) {
    switch (m) {
    case Modality::XY: return {Channel::X, Channel::Y};
    case Modality::SV: return {Channel::Steering, Channel::Velocity};
    case Modality::SP: return {Channel::Steering, Channel::Power};
    case Modality::VP: return {Channel::Velocity, Channel::Power};
    }
    throw SchemaError("bad modality");
}

} // namespace samjpf

#endif // SAMJPF_TYPES_HPP
