#ifndef CARADJ_ERROR_H_
#define CARADJ_ERROR_H_

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace caradj {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: CSV content, schema, configuration, or invalid arguments.
class InputError : public Error {
 public:
  using Error::Error;
};

// A fit or estimator could not be computed on the data it was given.
class EstimationError : public Error {
 public:
  using Error::Error;
};

// IRLS or a Newton iteration stopped without meeting its tolerance.
class ConvergenceError : public EstimationError {
 public:
  ConvergenceError(const std::string& what, double gradient_norm)
      : EstimationError(what), gradient_norm_(gradient_norm) {}
  double gradient_norm() const { return gradient_norm_; }

 private:
  double gradient_norm_;
};

// A variance flavor was requested that is not valid for the randomization
// scheme or pipeline. Carries the flavors that would be valid instead.
class RefusalError : public Error {
 public:
  RefusalError(const std::string& what, std::vector<std::string> alternatives)
      : Error(what), alternatives_(std::move(alternatives)) {}
  const std::vector<std::string>& alternatives() const {
    return alternatives_;
  }

 private:
  std::vector<std::string> alternatives_;
};

}  // namespace caradj

#endif  // CARADJ_ERROR_H_
