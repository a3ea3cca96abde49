#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace hypolab {

/// Failure with a stable machine-readable code; the CLI serializes the code
/// into report.json and maps numerical failures to exit code 3.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define HYPOLAB_DEFINE_ERROR(Name)                                    \
    class Name : public Error {                                       \
    public:                                                           \
        explicit Name(const std::string& what) : Error(#Name, what) {} \
    }

HYPOLAB_DEFINE_ERROR(UnknownGallery);
HYPOLAB_DEFINE_ERROR(InvalidProfile);
HYPOLAB_DEFINE_ERROR(GridTooLarge);
HYPOLAB_DEFINE_ERROR(GridTooSmall);
HYPOLAB_DEFINE_ERROR(EmptyDomain);
HYPOLAB_DEFINE_ERROR(MultiComponentDomain);
HYPOLAB_DEFINE_ERROR(CoefficientError);
HYPOLAB_DEFINE_ERROR(SingularSystem);
HYPOLAB_DEFINE_ERROR(SolverDiverged);
HYPOLAB_DEFINE_ERROR(OutsideBallOfValidity);
HYPOLAB_DEFINE_ERROR(PreconditionViolated);
HYPOLAB_DEFINE_ERROR(TotallyDegeneratePoint);
HYPOLAB_DEFINE_ERROR(CharacteristicDirection);
HYPOLAB_DEFINE_ERROR(DegenerateBasepoint);
HYPOLAB_DEFINE_ERROR(CollarViolation);
HYPOLAB_DEFINE_ERROR(ChainFailure);
HYPOLAB_DEFINE_ERROR(LeftDomain);
HYPOLAB_DEFINE_ERROR(ConfigError);

#undef HYPOLAB_DEFINE_ERROR

}  // namespace hypolab
