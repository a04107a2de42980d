#pragma once

#include <stdexcept>
#include <string>

namespace vecot {

// Backend
struct TransportError : std::runtime_error { using std::runtime_error::runtime_error; };
struct QuotaError : std::runtime_error { using std::runtime_error::runtime_error; };
struct FixtureMiss : std::runtime_error { using std::runtime_error::runtime_error; };

// Prompting
struct MissingBinding : std::runtime_error { using std::runtime_error::runtime_error; };
struct UnknownTemplate : std::runtime_error { using std::runtime_error::runtime_error; };
struct ParseFailure : std::runtime_error { using std::runtime_error::runtime_error; };
struct LengthMismatch : std::runtime_error { using std::runtime_error::runtime_error; };

// Consistency
struct EmptySampleSet : std::runtime_error { using std::runtime_error::runtime_error; };

// Retrieval
struct RetrieverUnavailable : std::runtime_error { using std::runtime_error::runtime_error; };
struct EmptyCorpus : std::runtime_error { using std::runtime_error::runtime_error; };
struct NoDatasetContext : std::runtime_error { using std::runtime_error::runtime_error; };
struct EmbeddingEndpointError : std::runtime_error { using std::runtime_error::runtime_error; };

// Editor
struct InstanceFailed : std::runtime_error { using std::runtime_error::runtime_error; };

// Eval harness
struct SchemaError : std::runtime_error {
  SchemaError(const std::string& msg, std::size_t row)
      : std::runtime_error(msg + " (row " + std::to_string(row) + ")"), row(row) {}
  std::size_t row;
};
struct InsufficientPool : std::runtime_error { using std::runtime_error::runtime_error; };
struct DegenerateLabels : std::runtime_error { using std::runtime_error::runtime_error; };

// CLI / config
struct ConfigError : std::runtime_error { using std::runtime_error::runtime_error; };

}  // namespace vecot
