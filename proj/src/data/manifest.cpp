#include "rainseg/data/manifest.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rainseg/core/binary_io.hpp"
#include "rainseg/core/error.hpp"

namespace rainseg {

using nlohmann::json;

std::vector<ChannelInfo> Manifest::channel_table() const {
  std::vector<ChannelInfo> out;
  for (const auto& c : channels) out.push_back({c.modality, c.month});
  return out;
}

std::string manifest_json(const Manifest& m) {
  json j;
  j["format"] = "rainseg-manifest";
  j["version"] = 1;
  j["region"] = m.scheme.region;
  j["lpa_mm"] = m.scheme.lpa_mm;
  json classes = json::array();
  for (const auto& c : m.scheme.classes) {
    json e{{"id", c.id}, {"name", c.name}, {"lower_mm", c.lower_mm}};
    e["upper_mm"] = c.upper_mm ? json(*c.upper_mm) : json(nullptr);
    classes.push_back(e);
  }
  j["classes"] = classes;
  j["height"] = m.height;
  j["width"] = m.width;
  json chans = json::array();
  for (const auto& c : m.channels) chans.push_back({{"modality", c.modality}, {"month", c.month}, {"path", c.path}});
  j["channels"] = chans;
  j["rain"] = m.rain;
  if (!m.labels.empty()) j["labels"] = m.labels;
  if (m.normalization) j["normalization"] = {{"mean", m.normalization->mean}, {"stddev", m.normalization->stddev}};
  return j.dump(2) + "\n";
}

Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
  Manifest m;
  m.base_dir = base_dir;
  try {
    const json j = json::parse(text);
    if (j.value("format", "") != "rainseg-manifest") throw ConfigError("manifest: missing format tag rainseg-manifest");
    if (j.at("version").get<int>() != 1) throw ConfigError("manifest: unsupported version");
    m.scheme.region = j.at("region").get<std::string>();
    m.scheme.lpa_mm = j.at("lpa_mm").get<double>();
    for (const auto& e : j.at("classes")) {
      ClassInterval c;
      c.id = e.at("id").get<std::uint8_t>();
      c.name = e.at("name").get<std::string>();
      c.lower_mm = e.at("lower_mm").get<double>();
      if (!e.at("upper_mm").is_null()) c.upper_mm = e.at("upper_mm").get<double>();
      m.scheme.classes.push_back(std::move(c));
    }
    m.scheme.validate();
    m.height = j.at("height").get<std::size_t>();
    m.width = j.at("width").get<std::size_t>();
    for (const auto& e : j.at("channels")) {
      m.channels.push_back({e.at("modality").get<std::string>(), e.at("month").get<std::size_t>(),
                            e.at("path").get<std::string>()});
    }
    if (m.channels.empty()) throw ConfigError("manifest lists no channels");
    m.rain = j.value("rain", "");
    m.labels = j.value("labels", "");
    if (m.rain.empty() && m.labels.empty()) throw ConfigError("manifest needs a rain grid or a label file");
    if (j.contains("normalization")) {
      ChannelStats st;
      st.mean = j["normalization"].at("mean").get<std::vector<double>>();
      st.stddev = j["normalization"].at("stddev").get<std::vector<double>>();
      if (st.mean.size() != m.channels.size() || st.stddev.size() != m.channels.size()) {
        throw ConfigError("manifest normalization does not cover every channel");
      }
      m.normalization = std::move(st);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  return m;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  io::write_text(path, manifest_json(manifest));
}

GridStack load_stack(const Manifest& m) {
  std::vector<ModalitySlice> slices;
  for (const auto& c : m.channels) slices.push_back({c.modality, c.month, read_grid(m.resolve(c.path))});
  auto stack = stack_modalities(slices);
  if (stack.height != m.height || stack.width != m.width) {
    throw ConfigError("manifest declares " + std::to_string(m.height) + "x" + std::to_string(m.width) +
                      " but grids are " + std::to_string(stack.height) + "x" + std::to_string(stack.width));
  }
  return stack;
}

LabelGrid load_labels(const Manifest& m) {
  LabelGrid labels = m.labels.empty() ? quantize_precip(read_grid(m.resolve(m.rain)), m.scheme)
                                      : read_labels(m.resolve(m.labels));
  if (labels.num_classes != m.scheme.num_classes()) {
    throw ConfigError("label file has " + std::to_string(labels.num_classes) + " classes, scheme has " +
                      std::to_string(m.scheme.num_classes()));
  }
  if (labels.height != m.height || labels.width != m.width) throw ConfigError("label grid extent differs from manifest");
  return labels;
}

}  // namespace rainseg
