#include "diffusyn/error.hpp"

namespace diffusyn {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Io: return "io";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::VersionedFormat: return "versioned-format";
        case ErrorKind::Validation: return "validation";
        case ErrorKind::Media: return "media";
        case ErrorKind::Precondition: return "precondition";
        case ErrorKind::Config: return "config";
        case ErrorKind::ProviderUnavailable: return "provider-unavailable";
        case ErrorKind::ProviderRejected: return "provider-rejected";
        case ErrorKind::GenerationRefused: return "generation-refused";
        case ErrorKind::QuotaExhausted: return "quota-exhausted";
        case ErrorKind::BudgetExhausted: return "budget-exhausted";
        case ErrorKind::IndeterminateResponse: return "indeterminate-response";
        case ErrorKind::UnscorableResponse: return "unscorable-response";
        case ErrorKind::UndefinedMetric: return "undefined-metric";
        case ErrorKind::DegenerateTable: return "degenerate-table";
        case ErrorKind::InsufficientInput: return "insufficient-input";
        case ErrorKind::InsufficientStratum: return "insufficient-stratum";
        case ErrorKind::Comparison: return "comparison";
        case ErrorKind::NotFound: return "not-found";
        case ErrorKind::Conflict: return "conflict";
        case ErrorKind::Usage: return "usage";
    }
    return "unknown";
}

}  // namespace diffusyn
