#pragma once

#include <stdexcept>
#include <string>

namespace tabdl {

// Shape disagreement between operands.
class dimension_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Out-of-range scalar argument (rates, weights, counts).
class argument_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Input outside a function's mathematical domain (log of x <= 0, sigma <= 0).
class domain_error : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// Malformed or inconsistent input data (CSV, labels, imputation).
class data_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf produced during training.
class numeric_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Bad configuration file or command-line usage.
class config_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Weight container that cannot be read or does not match the model.
class format_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace tabdl
