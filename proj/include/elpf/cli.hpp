#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "elpf/opf.hpp"

namespace elpf {

enum ExitCode : int { kExitOk = 0, kExitInput = 2, kExitSolve = 3, kExitInternal = 4 };

/// Record of one command run. Artifact paths are relative to the output
/// directory; the manifest itself is not listed.
struct RunManifest {
    struct Artifact {
        std::string path;
        std::string sha256;
        std::size_t bytes = 0;
    };
    std::string command;
    std::vector<std::string> args;
    std::vector<std::string> case_paths;
    nlohmann::json config = nlohmann::json::object();
    std::uint64_t seed = 0;
    std::string version = ELPF_VERSION;
    std::vector<Artifact> artifacts;
    std::vector<std::pair<std::string, double>> stages;  // wall-clock seconds

    nlohmann::json to_json() const;
};

nlohmann::json surrogates_to_json(const SurrogateModels& m);
SurrogateModels surrogates_from_json(const nlohmann::json& j);

/// Output root used when --out is absent.
inline constexpr const char* kOutputRootEnv = "ELPF_OUTPUT_ROOT";

/// Entry point of the elpf tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace elpf
