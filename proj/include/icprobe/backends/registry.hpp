#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "icprobe/backend.hpp"
#include "icprobe/error.hpp"
#include "icprobe/lexicon.hpp"

namespace icprobe {

using BackendParams = std::map<std::string, std::string>;

/// What a backend factory may need beyond its own parameters.
struct BackendContext {
  const Lexicons* lexicons = nullptr;
  WordSet vocabulary;  // every word the experiment will score
};

class UnknownBackend : public Error {
 public:
  using Error::Error;
};

/// Registered names: uniform, bigram, planted, subword, tiny_lstm, precomputed.
std::vector<std::string> backend_names();

/// Builds a backend by registry name. `seed` is the run seed for this model
/// instance; parameters not understood by the backend are rejected.
std::unique_ptr<Backend> make_backend(const std::string& name, const BackendParams& params, const BackendContext& ctx,
                                      uint64_t seed);

/// Greedy piece inventory for the subword backend: words of at most
/// `max_piece` characters are whole pieces, longer ones are chunked.
std::vector<std::string> chunked_pieces(const WordSet& words, size_t max_piece = 5);

}  // namespace icprobe
