#include "muce/manifest.hpp"

#include <cstdio>

#include "json.hpp"
#include "muce/errors.hpp"
#include "muce/io.hpp"
#include "muce/rng.hpp"

namespace muce::man {

std::string hash_file_hex(const std::string& path) {
    const std::string bytes = io::read_bytes(path);
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
    return buf;
}

static std::string manifest_path(const std::string& dir) { return dir + "/manifest.json"; }

Manifest load(const std::string& dir) {
    Manifest m;
    if (!io::file_exists(manifest_path(dir))) return m;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_bytes(manifest_path(dir)));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(manifest_path(dir), std::string("unreadable manifest: ") + e.what());
    }
    for (auto& [k, v] : j.at("entries").items()) m.entries[k] = v.get<std::string>();
    return m;
}

void save(const std::string& dir, const Manifest& m) {
    nlohmann::json j;
    j["entries"] = nlohmann::json::object();
    for (auto& [k, v] : m.entries) j["entries"][k] = v;  // std::map keeps keys sorted
    io::write_bytes(manifest_path(dir), j.dump(2) + "\n");
}

void record(const std::string& dir, const std::vector<std::string>& relpaths) {
    Manifest m = load(dir);
    for (const auto& rel : relpaths) m.entries[rel] = hash_file_hex(dir + "/" + rel);
    save(dir, m);
}

void check(const std::string& dir, const std::string& relpath) {
    Manifest m = load(dir);
    auto it = m.entries.find(relpath);
    if (it == m.entries.end())
        throw IoError(dir + "/" + relpath, "artifact is not recorded in the manifest");
    const std::string now = hash_file_hex(dir + "/" + relpath);
    if (now != it->second)
        throw IoError(dir + "/" + relpath, "artifact hash " + now +
                                               " does not match the manifest entry " + it->second);
}

}  // namespace muce::man
