#pragma once

#include <stdexcept>
#include <string>

namespace uavipp {

// Invalid user-facing configuration (bad start pose, degenerate generator spec, ...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller broke a precondition (invalid action, all-masked policy, ...).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class EpisodeOver : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A loss went non-finite during training.
class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InternalConsistencyError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace uavipp
