#pragma once

#include <string>

#include "sln/model.hpp"

namespace sln {

// Model description files are JSON, one of:
//   {"nu": [...], "Sigma": [[...], ...]}
//   {"equicorrelated": {"d": 30, "rho": 0.9, "s2": 0.0625, "nu": 0.0}}   (nu scalar or list)
//   {"black_scholes": {"X0": 50, "r": 0.07, "sigma": 0.25, "T": 0.3333, "d": 88}}
// Throws ModelFileError on parse or validation failure.
SlnModel parse_model_json(const std::string& text);
SlnModel load_model_file(const std::string& path);

}  // namespace sln
