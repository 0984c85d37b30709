#include "analogy/rpm_io.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace analogy::rpm {

using nlohmann::json;

namespace {

constexpr char kAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

json panel_to_json(const Panel& p) {
  json entities = json::array();
  for (const Entity& e : p.entities) {
    entities.push_back({e.position, e.type, e.size, e.color});
  }
  json out{{"entities", std::move(entities)}};
  if (p.raster) {
    std::vector<std::uint8_t> bytes(p.raster->pixels.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
      bytes[i] = static_cast<std::uint8_t>(std::lround(255.0 * p.raster->pixels[i]));
    }
    out["raster"] = base64_encode(bytes);
    out["hw"] = {p.raster->height, p.raster->width};
  }
  return out;
}

Panel panel_from_json(const json& j) {
  Panel p;
  for (const json& e : j.at("entities")) {
    if (!e.is_array() || e.size() != 4) throw std::invalid_argument("entity must have 4 fields");
    p.entities.push_back(Entity{e[0].get<int>(), e[1].get<int>(), e[2].get<int>(),
                                e[3].get<int>()});
  }
  if (j.contains("raster")) {
    const auto bytes = base64_decode(j.at("raster").get<std::string>());
    const auto& hw = j.at("hw");
    Raster r{hw.at(0).get<int>(), hw.at(1).get<int>(), {}};
    if (r.height <= 0 || r.width <= 0 ||
        bytes.size() != static_cast<std::size_t>(r.height) * r.width) {
      throw std::invalid_argument("raster size does not match hw");
    }
    r.pixels.reserve(bytes.size());
    for (std::uint8_t b : bytes) r.pixels.push_back(b / 255.0);
    p.raster = std::move(r);
  }
  return p;
}

json panels_to_json(const std::array<Panel, kPanels>& panels) {
  json out = json::array();
  for (const Panel& p : panels) out.push_back(panel_to_json(p));
  return out;
}

std::array<Panel, kPanels> panels_from_json(const json& j) {
  if (!j.is_array() || j.size() != kPanels) throw std::invalid_argument("expected 8 panels");
  std::array<Panel, kPanels> out;
  for (std::size_t i = 0; i < kPanels; ++i) out[i] = panel_from_json(j[i]);
  return out;
}

}  // namespace

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    const std::uint32_t b0 = bytes[i];
    const std::uint32_t b1 = i + 1 < bytes.size() ? bytes[i + 1] : 0;
    const std::uint32_t b2 = i + 2 < bytes.size() ? bytes[i + 2] : 0;
    const std::uint32_t triple = (b0 << 16) | (b1 << 8) | b2;
    out += kAlphabet[(triple >> 18) & 63];
    out += kAlphabet[(triple >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(triple >> 6) & 63] : '=';
    out += i + 2 < bytes.size() ? kAlphabet[triple & 63] : '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw std::invalid_argument("base64 length not a multiple of 4");
  std::array<int, 256> lookup;
  lookup.fill(-1);
  for (int i = 0; i < 64; ++i) lookup[static_cast<unsigned char>(kAlphabet[i])] = i;
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t triple = 0;
    int padding = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      int v = 0;
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        ++padding;
      } else {
        v = lookup[static_cast<unsigned char>(c)];
        if (v < 0 || padding) throw std::invalid_argument("invalid base64 character");
      }
      triple = (triple << 6) | static_cast<std::uint32_t>(v);
    }
    out.push_back(static_cast<std::uint8_t>(triple >> 16));
    if (padding < 2) out.push_back(static_cast<std::uint8_t>((triple >> 8) & 0xff));
    if (padding < 1) out.push_back(static_cast<std::uint8_t>(triple & 0xff));
  }
  return out;
}

std::string to_jsonl_line(const RpmProblem& p) {
  json rules = json::array();
  for (const Rule& r : p.rules) {
    rules.push_back({{"attr", to_string(r.attribute)}, {"kind", to_string(r.kind)},
                     {"param", r.param}});
  }
  json j;
  j["v"] = kFormatVersion;
  j["id"] = p.id;
  j["config"] = to_string(p.config);
  j["context"] = panels_to_json(p.context);
  j["choices"] = panels_to_json(p.choices);
  j["answer"] = p.answer;
  j["rules"] = std::move(rules);
  j["seed"] = {p.seed[0], p.seed[1]};
  return j.dump();
}

RpmProblem from_jsonl_line(const std::string& line, std::size_t line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_number, std::string("malformed JSON: ") + e.what());
  }
  try {
    if (!j.is_object() || !j.contains("v")) throw std::invalid_argument("missing version field");
    const int v = j.at("v").get<int>();
    if (v != kFormatVersion) {
      throw VersionError(line_number, "unsupported record version " + std::to_string(v));
    }
    RpmProblem p;
    p.id = j.at("id").get<std::int64_t>();
    p.config = parse_config(j.at("config").get<std::string>());
    p.context = panels_from_json(j.at("context"));
    p.choices = panels_from_json(j.at("choices"));
    p.answer = j.at("answer").get<int>();
    for (const json& r : j.at("rules")) {
      p.rules.push_back(Rule{parse_attribute(r.at("attr").get<std::string>()),
                             parse_rule_kind(r.at("kind").get<std::string>()),
                             r.at("param").get<int>()});
    }
    const auto& seed = j.at("seed");
    if (!seed.is_array() || seed.size() != 2) throw std::invalid_argument("seed must be a pair");
    p.seed = {seed[0].get<std::uint64_t>(), seed[1].get<std::uint64_t>()};
    return p;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(line_number, e.what());
  }
}

void serialize(const std::vector<RpmProblem>& problems, std::ostream& out) {
  for (const RpmProblem& p : problems) out << to_jsonl_line(p) << '\n';
}

std::vector<RpmProblem> deserialize(std::istream& in) {
  std::vector<RpmProblem> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    out.push_back(from_jsonl_line(line, number));
  }
  return out;
}

void save_corpus(const std::vector<RpmProblem>& problems, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  serialize(problems, out);
}

std::vector<RpmProblem> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return deserialize(in);
}

std::string corpus_hash(const std::vector<RpmProblem>& problems) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const RpmProblem& p : problems) {
    for (unsigned char c : to_jsonl_line(p) + "\n") {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace analogy::rpm
