#pragma once

#include <stdexcept>
#include <string>

namespace sas {

// Base of every error the library throws. Subclasses exist so callers and
// tests can dispatch on the failure kind without parsing messages.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SAS_DEFINE_ERROR(Name)               \
  class Name : public Error {                \
   public:                                   \
    explicit Name(const std::string& what)   \
        : Error(std::string(#Name ": ") + what) {} \
  };

SAS_DEFINE_ERROR(ShapeError)
SAS_DEFINE_ERROR(NodeNotFound)
SAS_DEFINE_ERROR(PathNotFound)
SAS_DEFINE_ERROR(InvalidPath)
SAS_DEFINE_ERROR(SegmentationError)
SAS_DEFINE_ERROR(EmptyCorpus)
SAS_DEFINE_ERROR(EmptyBatch)
SAS_DEFINE_ERROR(EmptyEval)
SAS_DEFINE_ERROR(EmptyTrajectory)
SAS_DEFINE_ERROR(NoDepth)
SAS_DEFINE_ERROR(SelfRelation)
SAS_DEFINE_ERROR(VocabError)
SAS_DEFINE_ERROR(SequenceTooShort)
SAS_DEFINE_ERROR(NonScalarLoss)
SAS_DEFINE_ERROR(ConfigError)
SAS_DEFINE_ERROR(IoError)
SAS_DEFINE_ERROR(FormatError)

#undef SAS_DEFINE_ERROR

}  // namespace sas
