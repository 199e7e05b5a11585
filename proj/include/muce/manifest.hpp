#pragma once

#include <map>
#include <string>
#include <vector>

namespace muce::man {

// Content hashes of the artifacts under a run directory, stored as
// <dir>/manifest.json with keys sorted for byte-stable output.
struct Manifest {
    std::map<std::string, std::string> entries;  // relative path -> fnv1a64 hex
};

std::string hash_file_hex(const std::string& path);

Manifest load(const std::string& dir);  // absent file -> empty manifest
void save(const std::string& dir, const Manifest& m);

// Hash the named artifacts (paths relative to dir) into the stored manifest.
void record(const std::string& dir, const std::vector<std::string>& relpaths);

// Verify a previously recorded artifact still matches its hash. Unknown or
// altered artifacts raise IoError.
void check(const std::string& dir, const std::string& relpath);

}  // namespace muce::man
