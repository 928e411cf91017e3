#pragma once

#include <stdexcept>
#include <string>

namespace selfnorm {

// Base class for every error this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error { public: using Error::Error; };
class NotSymmetric : public Error { public: using Error::Error; };
class NotFactorable : public Error { public: using Error::Error; };
class SingularDesign : public Error { public: using Error::Error; };
class OutOfRange : public Error { public: using Error::Error; };
class InvalidResponse : public Error { public: using Error::Error; };
class NoConvergence : public Error { public: using Error::Error; };
class Separation : public Error { public: using Error::Error; };
class SingularRotation : public Error { public: using Error::Error; };
class DegenerateColumn : public Error { public: using Error::Error; };
class TooFew : public Error { public: using Error::Error; };
class InvalidSpec : public Error { public: using Error::Error; };
class CenterOutside : public Error { public: using Error::Error; };
class Unbounded : public Error { public: using Error::Error; };
class DimensionExceeded : public Error { public: using Error::Error; };

}  // namespace selfnorm
