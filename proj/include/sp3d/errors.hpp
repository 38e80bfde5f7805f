#pragma once

#include <stdexcept>
#include <string>

namespace sp3d {

// Domain error with a stable machine-readable code. The CLI prints
// "error: code=<code> msg=<what>" on stderr and exits 1.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& msg)
      : std::runtime_error(msg), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

#define SP3D_DEFINE_ERROR(NAME)                          \
  class NAME : public Error {                            \
   public:                                               \
    explicit NAME(const std::string& msg)                \
        : Error(#NAME, msg) {}                           \
  }

SP3D_DEFINE_ERROR(BehindCamera);
SP3D_DEFINE_ERROR(SingularTransform);
SP3D_DEFINE_ERROR(ShapeMismatch);
SP3D_DEFINE_ERROR(InvalidSigma);
SP3D_DEFINE_ERROR(InvalidBeta);
SP3D_DEFINE_ERROR(DegenerateConfiguration);
SP3D_DEFINE_ERROR(WorkspaceTooCrowded);
SP3D_DEFINE_ERROR(IndexOutOfRange);
SP3D_DEFINE_ERROR(TooFewViews);
SP3D_DEFINE_ERROR(NoMatches);
SP3D_DEFINE_ERROR(StageOrderViolation);
SP3D_DEFINE_ERROR(DivergenceDetected);
SP3D_DEFINE_ERROR(InvalidCalibration);
SP3D_DEFINE_ERROR(InvalidConfig);
SP3D_DEFINE_ERROR(IoError);

#undef SP3D_DEFINE_ERROR

}  // namespace sp3d
