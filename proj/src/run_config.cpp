#include "viap/run_config.hpp"

#include <charconv>
#include <sstream>

#include "internal/binary_io.hpp"

namespace viap {

using nlohmann::json;

void RunConfig::resolve() {
  dataset.seed = seed;
  train.seed = seed;
  sweep.seed = seed;
}

void RunConfig::validate() const {
  dataset.validate();
  train.validate();
  sweep.validate();
}

void to_json(json& j, const RunConfig& c) {
  j = json{{"seed", c.seed},
           {"dataset", c.dataset},
           {"train", c.train},
           {"sweep", c.sweep},
           {"attack",
            {{"family", to_string(c.attack_family)},
             {"object", c.attack_object ? json(*c.attack_object) : json("all")}}}};
}

void from_json(const json& j, RunConfig& c) {
  c.seed = j.value("seed", c.seed);
  if (j.contains("dataset")) from_json(j.at("dataset"), c.dataset);
  if (j.contains("train")) from_json(j.at("train"), c.train);
  if (j.contains("sweep")) from_json(j.at("sweep"), c.sweep);
  if (j.contains("attack")) {
    const json& a = j.at("attack");
    if (a.contains("family")) c.attack_family = attack_family_from_string(a.at("family").get<std::string>());
    if (a.contains("object")) {
      const json& o = a.at("object");
      c.attack_object = o.is_string() ? std::nullopt : std::optional<std::size_t>(o.get<std::size_t>());
    }
  }
}

RunConfig load_run_config(const std::string& path) {
  const std::string text = detail::read_file(path);
  RunConfig c;
  try {
    from_json(json::parse(text), c);
  } catch (const json::exception& e) {
    throw Error("bad_config", path + ": " + e.what());
  }
  return c;
}

namespace {

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b == std::string::npos) throw Error("bad_config", "empty entry in list '" + csv + "'");
    out.push_back(item.substr(b, e - b + 1));
  }
  if (out.empty()) throw Error("bad_config", "empty list");
  return out;
}

}  // namespace

std::vector<double> parse_number_list(const std::string& csv) {
  std::vector<double> out;
  for (const std::string& s : split_csv(csv)) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw Error("bad_config", "not a number: '" + s + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<AttackFamily> parse_family_list(const std::string& csv) {
  std::vector<AttackFamily> out;
  for (const std::string& s : split_csv(csv)) out.push_back(attack_family_from_string(s));
  return out;
}

std::optional<std::size_t> parse_target(const std::string& text, const std::vector<std::string>& class_names) {
  if (text == "random") return std::nullopt;
  for (std::size_t i = 0; i < class_names.size(); ++i)
    if (class_names[i] == text) return i;
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error("bad_config", "target must be a class id, a class name or 'random', got '" + text + "'");
  }
  if (!class_names.empty() && v >= class_names.size()) {
    throw Error("bad_config", "target " + text + " out of range for " + std::to_string(class_names.size()) +
                                  " classes");
  }
  return v;
}

}  // namespace viap
