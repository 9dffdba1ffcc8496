#include "tdvc/error.hpp"

namespace tdvc {

const char* category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kDomain: return "domain";
    case ErrorCategory::kConvergence: return "convergence";
    case ErrorCategory::kContract: return "contract";
    case ErrorCategory::kResource: return "resource";
    case ErrorCategory::kBitstream: return "bitstream";
    case ErrorCategory::kFormat: return "format";
    case ErrorCategory::kUnsupportedVersion: return "unsupported-version";
    case ErrorCategory::kUnsupportedFormat: return "unsupported-format";
    case ErrorCategory::kIo: return "io";
    case ErrorCategory::kExternalTool: return "external-tool";
  }
  return "unknown";
}

}  // namespace tdvc
