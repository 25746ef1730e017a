#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mascot/backend/types.hpp"
#include "mascot/core/types.hpp"
#include "mascot/eval/criteria.hpp"

namespace mascot::backend {

class TextGenerator {
public:
    virtual ~TextGenerator() = default;
    // Must return params.num_samples completions; `generate()` below enforces it.
    virtual std::vector<std::string> complete(const std::string& prompt,
                                              const GenerationParams& params) = 0;
    virtual std::string identity() const = 0;
};

struct JudgeRequest {
    std::string prompt;     // rendered judge prompt (used by LLM judges)
    std::string correction; // non-empty on the corrective re-ask
    int attempt = 0;
    std::string response;
    std::string scenario;
    std::optional<PersonaProfile> persona; // absent for collective judging
    eval::CriteriaSet criteria;
};

// Produces the raw judge reply; parsing and validation live in `judge()`.
class JudgeModel {
public:
    virtual ~JudgeModel() = default;
    virtual std::string complete(const JudgeRequest& request) = 0;
    virtual std::string identity() const = 0;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<double> embed(const std::string& text) = 0;
    virtual std::size_t dimension() const = 0;
    virtual std::string identity() const = 0;
};

inline std::vector<std::string> generate(TextGenerator& backend, const std::string& prompt,
                                         const GenerationParams& params) {
    params.validate();
    auto out = backend.complete(prompt, params);
    if (out.size() != static_cast<std::size_t>(params.num_samples))
        throw ProtocolError(backend.identity() + " returned " + std::to_string(out.size()) +
                            " completions, expected " + std::to_string(params.num_samples));
    return out;
}

inline std::vector<double> embed(Embedder& backend, const std::string& text) {
    require(!text.empty(), "embed: text must be non-empty");
    auto v = backend.embed(text);
    if (v.size() != backend.dimension())
        throw ProtocolError(backend.identity() + " returned embedding of dimension " +
                            std::to_string(v.size()) + ", expected " +
                            std::to_string(backend.dimension()));
    return v;
}

} // namespace mascot::backend
