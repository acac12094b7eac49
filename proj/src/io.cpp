#include "vismpc/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vismpc/rng.hpp"

namespace vismpc::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads the next whitespace-delimited header token, skipping # comments.
std::string next_token(const std::string& s, std::size_t& pos) {
  while (pos < s.size()) {
    if (std::isspace(static_cast<unsigned char>(s[pos]))) {
      ++pos;
    } else if (s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  return s.substr(start, pos - start);
}

int parse_int(const std::string& tok) {
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    throw Error(Errc::Io, "malformed PPM header");
  }
  return std::stoi(tok);
}

json object_to_json(const sim::ObjectSpec& o) {
  json j;
  if (const auto* d = std::get_if<sim::Disc>(&o.shape)) {
    j["shape"] = "disc";
    j["radius"] = d->radius;
  } else {
    const auto& r = std::get<sim::Rect>(o.shape);
    j["shape"] = "rect";
    j["width"] = r.width;
    j["height"] = r.height;
  }
  j["color"] = o.color;
  j["mass_class"] = o.mass_class;
  return j;
}

sim::ObjectSpec object_from_json(const json& j) {
  sim::ObjectSpec o;
  const std::string kind = j.at("shape").get<std::string>();
  if (kind == "disc") {
    o.shape = sim::Disc{j.at("radius").get<double>()};
  } else if (kind == "rect") {
    o.shape = sim::Rect{j.at("width").get<double>(), j.at("height").get<double>()};
  } else {
    throw Error(Errc::Io, "unknown object shape '" + kind + "'");
  }
  o.color = j.at("color").get<sim::Color>();
  o.mass_class = j.at("mass_class").get<double>();
  return o;
}

json state_to_json(const sim::WorldState& s) {
  json poses = json::array();
  for (const auto& p : s.poses) poses.push_back({{"x", p.center.x}, {"y", p.center.y}, {"angle", p.angle}});
  return {{"t", s.time}, {"arm", {s.arm.x, s.arm.y}}, {"lift_remaining", s.lift_remaining}, {"objects", poses}};
}

sim::WorldState state_from_json(const json& j) {
  sim::WorldState s;
  s.time = j.at("t").get<int>();
  const auto arm = j.at("arm").get<std::array<double, 2>>();
  s.arm = {arm[0], arm[1]};
  s.lift_remaining = j.at("lift_remaining").get<int>();
  for (const auto& p : j.at("objects")) {
    s.poses.push_back({{p.at("x").get<double>(), p.at("y").get<double>()}, p.at("angle").get<double>()});
  }
  return s;
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(json::parse(line));
  }
  return out;
}

std::string frame_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu.ppm", i);
  return buf;
}

}  // namespace

std::string encode_ppm(const Frame& f) {
  if (f.channels() != 1 && f.channels() != 3) throw Error(Errc::InvalidFrame, "PPM needs 1 or 3 channels");
  std::string out = "P6\n" + std::to_string(f.width()) + " " + std::to_string(f.height()) + "\n255\n";
  out.reserve(out.size() + f.plane_size() * 3);
  for (int y = 0; y < f.height(); ++y) {
    for (int x = 0; x < f.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(f.at(f.channels() == 3 ? c : 0, x, y), 0.0, 1.0);
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
      }
    }
  }
  return out;
}

Frame decode_ppm(const std::string& bytes) {
  std::size_t pos = 0;
  if (next_token(bytes, pos) != "P6") throw Error(Errc::Io, "not a binary P6 PPM");
  const int w = parse_int(next_token(bytes, pos));
  const int h = parse_int(next_token(bytes, pos));
  const int maxval = parse_int(next_token(bytes, pos));
  if (maxval != 255) throw Error(Errc::Io, "only 8-bit PPM is supported");
  ++pos;  // single whitespace byte before the raster
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  if (bytes.size() < pos + need) throw Error(Errc::Io, "truncated PPM raster");
  Frame f(h, w, 3);
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) f.at(c, x, y) = raw[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0;
    }
  }
  return f;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_ppm(const Frame& f, const fs::path& path) { write_text(path, encode_ppm(f)); }

Frame read_ppm(const fs::path& path) { return decode_ppm(read_text(path)); }

void write_trajectory(const sim::TrajectoryRecord& rec, const fs::path& dir, std::uint64_t seed) {
  if (rec.frames.empty()) throw Error(Errc::InvalidConfig, "trajectory has no frames");
  if (rec.frames.size() != rec.actions.size() + 1 || rec.states.size() != rec.frames.size()) {
    throw Error(Errc::ShapeMismatch, "trajectory needs length+1 frames and states for length actions");
  }
  fs::create_directories(dir / "frames");
  const Frame& f0 = rec.frames.front();
  json objects = json::array();
  for (const auto& o : rec.objects) objects.push_back(object_to_json(o));
  const json manifest = {{"length", rec.actions.size()}, {"height", f0.height()}, {"width", f0.width()},
                         {"channels", f0.channels()},    {"seed", seed},           {"objects", objects}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  for (std::size_t i = 0; i < rec.frames.size(); ++i) write_ppm(rec.frames[i], dir / "frames" / frame_name(i));
  std::string actions;
  for (const auto& a : rec.actions) actions += json{{"dx", a.dx}, {"dy", a.dy}, {"lift", a.lift}}.dump() + "\n";
  write_text(dir / "actions.jsonl", actions);
  std::string states;
  for (const auto& s : rec.states) states += state_to_json(s).dump() + "\n";
  write_text(dir / "states.jsonl", states);
}

sim::TrajectoryRecord read_trajectory(const fs::path& dir) {
  try {
    const json manifest = json::parse(read_text(dir / "manifest.json"));
    const auto length = manifest.at("length").get<std::size_t>();
    const int h = manifest.at("height").get<int>();
    const int w = manifest.at("width").get<int>();
    sim::TrajectoryRecord rec;
    for (const auto& o : manifest.at("objects")) rec.objects.push_back(object_from_json(o));
    for (std::size_t i = 0; i <= length; ++i) {
      Frame f = read_ppm(dir / "frames" / frame_name(i));
      if (f.height() != h || f.width() != w) throw Error(Errc::ShapeMismatch, "frame size disagrees with manifest");
      rec.frames.push_back(std::move(f));
    }
    for (const auto& j : read_jsonl(dir / "actions.jsonl")) {
      rec.actions.push_back({j.at("dx").get<double>(), j.at("dy").get<double>(), j.at("lift").get<int>()});
    }
    for (const auto& j : read_jsonl(dir / "states.jsonl")) rec.states.push_back(state_from_json(j));
    if (rec.actions.size() != length || rec.states.size() != length + 1) {
      throw Error(Errc::ShapeMismatch, "actions/states length disagrees with manifest in " + dir.string());
    }
    return rec;
  } catch (const json::exception& e) {
    throw Error(Errc::Io, "malformed dataset entry " + dir.string() + ": " + e.what());
  }
}

void write_dataset(std::span<const sim::TrajectoryRecord> records, const fs::path& dir, std::uint64_t base_seed) {
  fs::create_directories(dir);
  for (std::size_t k = 0; k < records.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "%04zu", k);
    write_trajectory(records[k], dir / name, derive_seed(base_seed, k));
  }
}

std::vector<sim::TrajectoryRecord> read_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(Errc::Io, "dataset directory not found: " + dir.string());
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && fs::exists(e.path() / "manifest.json")) entries.push_back(e.path());
  }
  std::sort(entries.begin(), entries.end());
  std::vector<sim::TrajectoryRecord> out;
  for (const auto& p : entries) out.push_back(read_trajectory(p));
  return out;
}

}  // namespace vismpc::io
