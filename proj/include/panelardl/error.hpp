#pragma once

#include <stdexcept>
#include <string>

namespace panelardl {

/// Broad failure category; the CLI maps these onto exit codes.
enum class ErrorKind { Usage, Data, Numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& what)
      : std::runtime_error(what), kind_(kind), code_(std::move(code)) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
  /// Short machine-readable tag, e.g. "schema" or "nonstationary".
  [[nodiscard]] const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

#define PANELARDL_DEFINE_ERROR(Name, Kind, Code)                      \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(Kind, Code, what) {} \
  };

PANELARDL_DEFINE_ERROR(UsageError, ErrorKind::Usage, "usage")
PANELARDL_DEFINE_ERROR(SchemaError, ErrorKind::Data, "schema")
PANELARDL_DEFINE_ERROR(ParseError, ErrorKind::Data, "parse")
PANELARDL_DEFINE_ERROR(DuplicateError, ErrorKind::Data, "duplicate")
PANELARDL_DEFINE_ERROR(FilterError, ErrorKind::Data, "filter")
PANELARDL_DEFINE_ERROR(MissingPeriodError, ErrorKind::Data, "missing_period")
PANELARDL_DEFINE_ERROR(ScalingError, ErrorKind::Data, "scaling")
PANELARDL_DEFINE_ERROR(DesignError, ErrorKind::Data, "design")
PANELARDL_DEFINE_ERROR(AbsorptionError, ErrorKind::Numerical, "absorption")
PANELARDL_DEFINE_ERROR(EstimationError, ErrorKind::Numerical, "estimation")
PANELARDL_DEFINE_ERROR(SingularityError, ErrorKind::Numerical, "singularity")
PANELARDL_DEFINE_ERROR(NonstationaryError, ErrorKind::Numerical, "nonstationary")
PANELARDL_DEFINE_ERROR(SearchError, ErrorKind::Numerical, "search")
PANELARDL_DEFINE_ERROR(JackknifeError, ErrorKind::Numerical, "jackknife")
PANELARDL_DEFINE_ERROR(StabilityError, ErrorKind::Numerical, "stability")

#undef PANELARDL_DEFINE_ERROR

}  // namespace panelardl
