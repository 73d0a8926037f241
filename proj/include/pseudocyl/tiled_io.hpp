#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "pseudocyl/image_io.hpp"
#include "pseudocyl/representation.hpp"

namespace pseudocyl {

inline constexpr const char* kManifestName = "manifest.json";

inline std::string tile_file_name(int t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "tile_%03d.png", t);
  return buf;
}

inline PseudocylConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config '" + path.string() + "'");
  try {
    return nlohmann::json::parse(is).get<PseudocylConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
}

/// Writes `text` to `path` through a sibling temporary file and a rename.
inline void write_text_atomically(const std::filesystem::path& path, const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp);
    os << text;
    if (!os) throw std::runtime_error("cannot write '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline void write_png_atomically(const std::filesystem::path& path, const PlaneImage& img) {
  const std::filesystem::path tmp = path.parent_path() / (path.stem().string() + ".tmp.png");
  write_png(tmp, img);
  std::filesystem::rename(tmp, path);
}

inline void save_config(const std::filesystem::path& path, const PseudocylConfig& cfg) {
  write_text_atomically(path, nlohmann::json(cfg).dump(2) + "\n");
}

/// Manifest layout: the config keys plus "tiles": [file names in tile order].
inline void save_tiled(const std::filesystem::path& dir, const TiledImage& tiled) {
  tiled.validate();
  std::filesystem::create_directories(dir);
  nlohmann::json manifest = tiled.config;
  manifest["tiles"] = nlohmann::json::array();
  for (int t = 0; t < tiled.config.tile_count(); ++t) {
    write_png_atomically(dir / tile_file_name(t), tiled.tiles[static_cast<std::size_t>(t)]);
    manifest["tiles"].push_back(tile_file_name(t));
  }
  write_text_atomically(dir / kManifestName, manifest.dump(2) + "\n");
}

inline TiledImage load_tiled(const std::filesystem::path& dir) {
  std::ifstream is(dir / kManifestName);
  if (!is) throw std::runtime_error("no manifest in '" + dir.string() + "'");
  const nlohmann::json manifest = nlohmann::json::parse(is);
  TiledImage tiled{manifest.get<PseudocylConfig>(), {}};
  for (const auto& name : manifest.at("tiles")) tiled.tiles.push_back(read_png(dir / name.get<std::string>()));
  tiled.validate();
  return tiled;
}

}  // namespace pseudocyl
