#include "capnet/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "capnet/random.hpp"

namespace capnet {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!f) throw DataError("write failed for " + path.string());
}

std::string join_ids(const std::vector<ImageId>& ids) {
  std::string s;
  for (auto id : ids) {
    if (!s.empty()) s += ", ";
    s += std::to_string(id);
  }
  return s;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no) {
  T value{};
  const char* first = field.data();
  const char* last = field.data() + field.size();
  // from_chars rejects a leading '+'; accept it for hand-written files.
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw DataError("feature file line " + std::to_string(line_no) + ": cannot parse '" +
                    std::string(field) + "'");
  }
  return value;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
}

}  // namespace

std::vector<Annotation> parse_annotations(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("annotations: ") + e.what(), e.byte);
  }
  try {
    std::set<ImageId> known;
    if (doc.contains("images")) {
      for (const auto& img : doc.at("images")) known.insert(img.at("id").get<ImageId>());
    }
    std::vector<Annotation> out;
    std::vector<ImageId> missing;
    for (const auto& a : doc.at("annotations")) {
      Annotation ann{a.at("image_id").get<ImageId>(), a.at("caption").get<std::string>()};
      if (!known.count(ann.image_id) &&
          std::find(missing.begin(), missing.end(), ann.image_id) == missing.end()) {
        missing.push_back(ann.image_id);
      }
      out.push_back(std::move(ann));
    }
    if (!missing.empty()) {
      throw IntegrityError("annotations reference undeclared image ids: " + join_ids(missing),
                           missing);
    }
    return out;
  } catch (const json::exception& e) {
    throw DataError(std::string("annotations schema: ") + e.what());
  }
}

std::vector<Annotation> load_annotations(const std::filesystem::path& path) {
  return parse_annotations(read_file(path));
}

void save_annotations(const std::filesystem::path& path,
                      const std::vector<Annotation>& annotations) {
  std::set<ImageId> ids;
  for (const auto& a : annotations) ids.insert(a.image_id);
  json images = json::array();
  for (auto id : ids) images.push_back({{"id", id}});
  json anns = json::array();
  std::size_t next_id = 1;
  for (const auto& a : annotations) {
    anns.push_back({{"id", next_id++}, {"image_id", a.image_id}, {"caption", a.caption}});
  }
  json doc = {{"images", images}, {"annotations", anns}};
  write_file(path, doc.dump(1) + "\n");
}

void FeatureTable::add(ImageId id, Vector feature) {
  if (feature.size() != dim_) {
    throw DataError("feature for image " + std::to_string(id) + " has length " +
                    std::to_string(feature.size()) + ", expected " + std::to_string(dim_));
  }
  if (!all_finite(feature.span())) {
    throw DataError("feature for image " + std::to_string(id) + " contains a non-finite value");
  }
  if (!rows_.emplace(id, std::move(feature)).second) {
    throw DataError("duplicate feature row for image " + std::to_string(id));
  }
}

const Vector& FeatureTable::at(ImageId id) const {
  auto it = rows_.find(id);
  if (it == rows_.end()) {
    throw IntegrityError("no feature row for image " + std::to_string(id), {id});
  }
  return it->second;
}

FeatureTable parse_features(std::string_view csv_text) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&](std::string_view& line) {
    while (pos < csv_text.size()) {
      auto nl = csv_text.find('\n', pos);
      if (nl == std::string_view::npos) nl = csv_text.size();
      line = csv_text.substr(pos, nl - pos);
      pos = nl + 1;
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (!line.empty()) return true;
    }
    return false;
  };

  std::string_view line;
  if (!next_line(line)) throw DataError("feature file is empty");
  const auto header = split_commas(line);
  if (header.size() != 2 || header[0] != "image_id") {
    throw DataError("feature file header must be 'image_id,<D>'");
  }
  const auto dim = parse_number<std::size_t>(header[1], line_no);
  if (dim == 0) throw DataError("feature dimension must be >= 1");

  FeatureTable table(dim);
  while (next_line(line)) {
    const auto fields = split_commas(line);
    if (fields.size() != dim + 1) {
      throw DataError("feature file line " + std::to_string(line_no) + ": " +
                      std::to_string(fields.size() - 1) + " values, expected " +
                      std::to_string(dim));
    }
    const auto id = parse_number<ImageId>(fields[0], line_no);
    Vector v(dim);
    for (std::size_t i = 0; i < dim; ++i) v[i] = parse_number<double>(fields[i + 1], line_no);
    table.add(id, std::move(v));
  }
  return table;
}

FeatureTable load_features(const std::filesystem::path& path) {
  return parse_features(read_file(path));
}

std::string serialize_features(const FeatureTable& table) {
  std::string out = "image_id," + std::to_string(table.dim()) + "\n";
  char buf[64];
  for (const auto& [id, v] : table) {
    out += std::to_string(id);
    for (double x : v) {
      auto res = std::to_chars(buf, buf + sizeof(buf), x);
      out += ',';
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

void save_features(const std::filesystem::path& path, const FeatureTable& table) {
  write_file(path, serialize_features(table));
}

std::vector<CaptionedExample> build_examples(const std::vector<Annotation>& annotations,
                                             const FeatureTable& features,
                                             const Vocabulary& vocab) {
  std::vector<ImageId> missing;
  for (const auto& a : annotations) {
    if (!features.contains(a.image_id) &&
        std::find(missing.begin(), missing.end(), a.image_id) == missing.end()) {
      missing.push_back(a.image_id);
    }
  }
  if (!missing.empty()) {
    throw IntegrityError("no feature rows for annotated images: " + join_ids(missing), missing);
  }
  std::vector<CaptionedExample> out;
  out.reserve(annotations.size());
  for (const auto& a : annotations) {
    const auto tokens = tokenize(a.caption);
    out.push_back({a.image_id, features.at(a.image_id), vocab.encode(tokens)});
  }
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t count, std::size_t batch_size,
                                                   std::uint64_t seed) {
  if (count == 0) throw DataError("make_batches: no examples");
  if (batch_size == 0) throw DataError("make_batches: batch_size must be >= 1");

  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = count - 1; i > 0; --i) {
    std::swap(order[i], order[rng.below(i + 1)]);
  }

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t b = 0; b < count; b += batch_size) {
    const auto e = std::min(count, b + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                         order.begin() + static_cast<std::ptrdiff_t>(e));
  }
  return batches;
}

std::string synthetic_caption(const SyntheticSpec& spec, std::size_t pattern) {
  std::string caption = spec.caption_template;
  const auto slot = caption.find("{}");
  if (slot == std::string::npos) return caption + " " + spec.patterns.at(pattern);
  return caption.replace(slot, 2, spec.patterns.at(pattern));
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.patterns.empty()) throw std::invalid_argument("synthetic spec needs at least one pattern");
  if (spec.patterns.size() > spec.dim) {
    throw std::invalid_argument("synthetic spec: " + std::to_string(spec.patterns.size()) +
                                " patterns do not fit in dimension " + std::to_string(spec.dim));
  }
  if (spec.noise < 0.0) throw std::invalid_argument("synthetic spec: noise must be >= 0");

  SyntheticDataset ds;
  ds.features = FeatureTable(spec.dim);
  Rng rng(spec.seed);
  for (std::size_t i = 0; i < spec.num_images; ++i) {
    const auto pattern = i % spec.patterns.size();
    Vector f(spec.dim);
    for (std::size_t d = 0; d < spec.dim; ++d) {
      const double jitter = rng.uniform(-spec.noise, spec.noise);
      f[d] = (d == pattern ? 1.0 : 0.0) + (spec.noise > 0.0 ? jitter : 0.0);
    }
    const auto id = static_cast<ImageId>(i + 1);
    ds.features.add(id, std::move(f));
    ds.annotations.push_back({id, synthetic_caption(spec, pattern)});
    ds.pattern_of.push_back(pattern);
  }
  return ds;
}

}  // namespace capnet
