#pragma once

#include <array>

// Published experimental anchors for the squeezed-light source. Values are
// used by configs and acceptance checks, never inside physics routines.
namespace sqsim::reference {

/// Singular values of the 21 clipped HG modes, descending.
inline constexpr std::array<double, 21> kClippedSingularValues{
    1.42, 1.40, 1.31, 1.28, 1.21, 1.19, 1.18, 1.12, 1.09, 1.08, 1.02,
    0.99, 0.97, 0.94, 0.90, 0.84, 0.60, 0.30, 0.08, 0.02, 0.005};
inline constexpr int kClippedRank = 18;
inline constexpr double kRankThreshold = 0.1;

inline constexpr double kCenterNm = 1560.0;
inline constexpr double kHg0WidthNm = 45.0;
inline constexpr int kHgModeCount = 21;
inline constexpr int kFlatModeCount = 4;

inline constexpr double kPumpCenterNm = 780.0;
inline constexpr double kPumpBandwidthNm = 2.0;
inline constexpr double kWaveguideLengthMm = 15.0;

inline constexpr int kFrexelBands = 8;
inline constexpr double kFrexelWidthNm = 7.0;

inline constexpr double kEtaPhotodiode = 0.85;
inline constexpr double kEtaOptical = 1.0;
inline constexpr double kVisibility = 0.77;
inline constexpr double kClearanceDb = 20.0;

/// Second-harmonic efficiency of the waveguide (W^-1); corroborates the
/// fitted parametric efficiency.
inline constexpr double kEtaShg = 0.33;

inline constexpr double kBestSqueezingDb = -2.5;
inline constexpr int kBipartitions8 = 127;
inline constexpr double kPptViolationFraction = 0.94;
inline constexpr int kExtremaAveraged = 15;

}  // namespace sqsim::reference
