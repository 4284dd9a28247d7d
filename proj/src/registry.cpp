#include <fstream>
#include <map>
#include <sstream>

#include "distpre/coordinator.hpp"
#include "distpre/error.hpp"
#include "distpre/serialize.hpp"

namespace distpre {

namespace fs = std::filesystem;

namespace {

void check_id(const std::string& id) {
  if (id.empty() || id == "." || id == ".." || id.find_first_of("/\\") != std::string::npos) {
    throw IntegrityError("detector id '" + id + "' cannot name a model file");
  }
}

fs::path model_path(const fs::path& dir, const std::string& id) {
  return dir / "models" / (id + ".json");
}

void write_file(const fs::path& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << doc.dump(1) << '\n';
  if (!out) throw ConfigError("write failed for '" + path.string() + "'");
}

nlohmann::json read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntegrityError("missing registry file '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

}  // namespace

void registry_save(std::span<const ModelAssignment> assignments, const fs::path& dir,
                   const nlohmann::json& config_echo) {
  std::error_code ec;
  fs::create_directories(dir / "models", ec);
  if (ec) throw ConfigError("cannot create '" + (dir / "models").string() + "': " + ec.message());

  nlohmann::json records = nlohmann::json::array();
  for (const auto& a : assignments) {
    check_id(a.detector_id);
    nlohmann::json r = {{"detector_id", a.detector_id},
                        {"kind", a.kind == AssignmentKind::owned ? "owned" : "shared"}};
    if (a.kind == AssignmentKind::owned) {
      if (!a.model) throw IntegrityError("owned detector '" + a.detector_id + "' has no model");
      write_file(model_path(dir, a.detector_id), model_to_json(*a.model));
    } else {
      if (!a.donor_id) throw IntegrityError("shared detector '" + a.detector_id + "' has no donor");
      r["donor_id"] = *a.donor_id;
      if (a.matched_aard) r["matched_aard"] = number_to_json(*a.matched_aard);
    }
    records.push_back(std::move(r));
  }
  write_file(dir / "manifest.json", {{"format_version", kRegistryFormatVersion},
                                     {"config", config_echo},
                                     {"assignments", std::move(records)}});
}

std::vector<ModelAssignment> registry_load(const fs::path& dir) {
  const nlohmann::json manifest = read_file(dir / "manifest.json");
  std::vector<ModelAssignment> out;
  try {
    const int version = manifest.at("format_version").get<int>();
    if (version != kRegistryFormatVersion) {
      throw FormatError("registry format_version " + std::to_string(version) + ", expected " +
                        std::to_string(kRegistryFormatVersion));
    }
    for (const auto& r : manifest.at("assignments")) {
      ModelAssignment a;
      a.detector_id = r.at("detector_id").get<std::string>();
      check_id(a.detector_id);
      const std::string kind = r.at("kind").get<std::string>();
      if (kind == "owned") {
        a.kind = AssignmentKind::owned;
      } else if (kind == "shared") {
        a.kind = AssignmentKind::shared;
        a.donor_id = r.at("donor_id").get<std::string>();
        if (r.contains("matched_aard")) a.matched_aard = number_from_json(r.at("matched_aard"));
      } else {
        throw FormatError("unknown assignment kind '" + kind + "'");
      }
      out.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed registry manifest: " + std::string(e.what()));
  }

  std::map<std::string, std::shared_ptr<const LstmModel>> owned;
  for (auto& a : out) {
    if (a.kind != AssignmentKind::owned) continue;
    a.model = std::make_shared<const LstmModel>(model_from_json(read_file(model_path(dir, a.detector_id))));
    if (!owned.emplace(a.detector_id, a.model).second) {
      throw IntegrityError("detector '" + a.detector_id + "' listed twice");
    }
  }
  for (auto& a : out) {
    if (a.kind != AssignmentKind::shared) continue;
    auto it = owned.find(*a.donor_id);
    if (it == owned.end()) {
      throw IntegrityError("detector '" + a.detector_id + "' refers to donor '" + *a.donor_id +
                           "' which owns no model");
    }
    a.model = it->second;
  }
  return out;
}

}  // namespace distpre
