#ifndef PGNN_MANIFEST_HPP
#define PGNN_MANIFEST_HPP

#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace pgnn {

// One manifest per run: the command, the fully resolved configuration
// snapshot and the artifact paths. The [config] section is itself a valid
// configuration file, so a run can be replayed from its manifest.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config_snapshot;  // dotted keys
  std::map<std::string, std::string> artifacts;        // name -> path
  std::string started_at, finished_at;

  static std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&tt, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  void write(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("manifest: cannot open for writing: " + path);
    os << "[run]\n";
    os << "command = " << command << "\n";
    os << "seed = " << seed << "\n";
    os << "started_at = " << started_at << "\n";
    os << "finished_at = " << finished_at << "\n";
    for (const auto& [name, p] : artifacts) os << "artifact_" << name << " = " << p << "\n";
    std::string section;
    for (const auto& [dotted, value] : config_snapshot) {
      const auto dot = dotted.find('.');
      const std::string sec = dotted.substr(0, dot);
      if (sec != section) {
        os << "\n[" << sec << "]\n";
        section = sec;
      }
      os << dotted.substr(dot + 1) << " = " << value << "\n";
    }
  }
};

}  // namespace pgnn

#endif
