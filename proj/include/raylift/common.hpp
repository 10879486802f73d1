#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace raylift {

enum class ErrorCode {
  InvalidArgument,
  BehindCamera,
  NegativeHeight,
  RollTooLarge,
  FrameMismatch,
  JointSetMismatch,
  EmptyGrid,
  FovViolation,
  ShapeMismatch,
  ModeMismatch,
  RayParallel,
  NonFiniteLoss,
  UnknownAxis,
  IoError,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument:  return "InvalidArgument";
    case ErrorCode::BehindCamera:     return "BehindCamera";
    case ErrorCode::NegativeHeight:   return "NegativeHeight";
    case ErrorCode::RollTooLarge:     return "RollTooLarge";
    case ErrorCode::FrameMismatch:    return "FrameMismatch";
    case ErrorCode::JointSetMismatch: return "JointSetMismatch";
    case ErrorCode::EmptyGrid:        return "EmptyGrid";
    case ErrorCode::FovViolation:     return "FovViolation";
    case ErrorCode::ShapeMismatch:    return "ShapeMismatch";
    case ErrorCode::ModeMismatch:     return "ModeMismatch";
    case ErrorCode::RayParallel:      return "RayParallel";
    case ErrorCode::NonFiniteLoss:    return "NonFiniteLoss";
    case ErrorCode::UnknownAxis:      return "UnknownAxis";
    case ErrorCode::IoError:          return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline void expect(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) throw Error(code, msg);
}

// Tolerances shared across modules. Values are part of the contract the tests
// pin down; change them only together with the tests.
namespace tol {
inline constexpr double kOrthonormal = 1e-9;      // ||R^T R - I|| bound on rotations
inline constexpr double kBehindCamera = 1e-6;     // minimum camera-frame depth (m)
inline constexpr double kRollMax = 0.05;          // |roll| bound (rad) for normalization
inline constexpr double kRayParallel = 1e-9;      // |dir.y| bound for ray-plane hits
inline constexpr double kBoneDrift = 1e-9;        // relative bone-length drift per sequence
inline constexpr double kRoundTrip = 1e-12;       // frame-change round trips (m)
inline constexpr double kGridFuzz = 1e-9;         // inclusive grid endpoint slack
}  // namespace tol

// SplitMix64: tiny deterministic PRNG. The standard <random> distributions are
// implementation-defined, which would break byte-for-byte reproducibility of
// generated datasets, so uniform and normal draws are hand-rolled here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller; one value per draw keeps streams simple
  double normal() {
    double u1 = 0.0;
    do { u1 = uniform(); } while (u1 <= 0.0);
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  std::uint32_t below(std::uint32_t n) { return std::uint32_t(next_u64() % n); }

  // independent child stream; label picks the stream
  Rng fork(std::uint64_t label) const {
    Rng r(state_ ^ (0x9e3779b97f4a7c15ULL * (label + 1)));
    r.next_u64();
    return r;
  }

 private:
  std::uint64_t state_;
};

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// 17 significant digits round-trip IEEE doubles exactly.
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  expect(f != nullptr, ErrorCode::IoError, "cannot open " + path + " for writing");
  std::fwrite(content.data(), 1, content.size(), f);
  std::fclose(f);
}

inline std::string read_text_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  expect(f != nullptr, ErrorCode::IoError, "cannot open " + path);
  std::string out;
  char buf[65536];
  size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) out.append(buf, n);
  std::fclose(f);
  return out;
}

}  // namespace raylift
