#pragma once

#include <stdexcept>
#include <string>

namespace shadowcast {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// UE and PD share a floor projection; the link has no direction in the plane.
struct DegenerateLink : Error {
    DegenerateLink() : Error("degenerate link: UE and PD project to the same floor point") {}
};

struct InvalidGrid : Error {
    using Error::Error;
};

struct SamplingExhausted : Error {
    using Error::Error;
};

/// No blocked link was observed, so there is nothing to estimate from.
struct Outage : Error {
    Outage() : Error("outage: no blocked links observed") {}
};

struct ConfigError : Error {
    using Error::Error;
};

}  // namespace shadowcast
