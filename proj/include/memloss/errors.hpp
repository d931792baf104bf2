#pragma once

#include <stdexcept>
#include <string>

namespace memloss {

// Base of every error thrown by the library. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define MEMLOSS_DEFINE_ERROR(Name)                                     \
    class Name : public Error {                                        \
    public:                                                            \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
    }

MEMLOSS_DEFINE_ERROR(DomainError);      // argument outside the state interval / branch image
MEMLOSS_DEFINE_ERROR(SingularPoint);    // derivative undefined or infinite
MEMLOSS_DEFINE_ERROR(ParamError);       // invalid map or model parameters
MEMLOSS_DEFINE_ERROR(IndexError);       // explicit sequence exhausted
MEMLOSS_DEFINE_ERROR(NoGoodMaps);       // frequency analysis without any good map
MEMLOSS_DEFINE_ERROR(DepthError);       // table queried beyond its tabulated depth
MEMLOSS_DEFINE_ERROR(NonPositiveValue); // log-log fit over a nonpositive value
MEMLOSS_DEFINE_ERROR(ShapeMismatch);    // densities on different grids
MEMLOSS_DEFINE_ERROR(NotNormalized);    // tail envelope with r(1) != 1
MEMLOSS_DEFINE_ERROR(HorizonError);     // tails not tabulated far enough for the request
MEMLOSS_DEFINE_ERROR(FormatError);      // malformed CSV / JSON input

#undef MEMLOSS_DEFINE_ERROR

} // namespace memloss
