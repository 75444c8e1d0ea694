#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evoscope/tasks/genome.hpp"

namespace evoscope {

struct ParentInfo {
    std::uint64_t id = 0;
    Genome genome;
    std::string serialized;
    double raw_fitness = 0.0;
};

/// Everything an operator sees for one offspring attempt.
struct MutationRequest {
    std::string task_id;
    std::string task_statement;
    std::vector<ParentInfo> parents;  // non-empty
    std::size_t attempt_index = 0;
    std::uint64_t seed = 0;  // private random stream for this attempt
};

/// Failure tags recorded on invalid attempts.
namespace failure {
inline constexpr const char* kParse = "parse-failure";
inline constexpr const char* kTransport = "transport-error";
inline constexpr const char* kInvalidGenome = "invalid-genome";
inline constexpr const char* kOperator = "operator-error";
}  // namespace failure

struct MutationOutcome {
    std::optional<Genome> child;  // empty on failure
    std::string raw_text;         // operator output as produced, when there is one
    std::string tag;              // which operator produced the attempt
    std::string failure;          // empty on success
    std::optional<std::size_t> exchange_index;  // gateway ledger entry, if any
};

/// Produces one offspring per call. Implementations keep no mutable state
/// between calls other than what is derived from MutationRequest::seed, so
/// concurrent calls are safe and reproducible.
class MutationOperator {
public:
    virtual ~MutationOperator() = default;
    virtual std::string id() const = 0;
    virtual MutationOutcome mutate(const MutationRequest& req) const = 0;
};

}  // namespace evoscope
