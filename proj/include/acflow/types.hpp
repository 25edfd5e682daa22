#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace acflow {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Base for all domain errors; subclasses name the violated contract.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct NonStochasticRow : Error { using Error::Error; };
struct NonFullSupportBeta : Error { using Error::Error; };
struct BadDiscount : Error { using Error::Error; };
struct NonFiniteLogit : Error { using Error::Error; };
struct InfeasibleSpec : Error { using Error::Error; };
struct SolveFailure : Error { using Error::Error; };
struct NonConvergence : Error { using Error::Error; };
struct SingularGram : Error { using Error::Error; };
struct NotRealisable : Error { using Error::Error; };
struct StepSizeTooLarge : Error { using Error::Error; };
struct BlowupDetected : Error { using Error::Error; };
struct InadmissibleEta : Error { using Error::Error; };
struct NotTangent : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace acflow
