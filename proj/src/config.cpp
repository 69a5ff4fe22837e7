#include "pilotwave/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pilotwave/spin_expr.hpp"

namespace pilotwave {

namespace {

const std::set<std::string, std::less<>> kSections = {"physics", "run",    "dofs",   "packets",
                                                      "initial", "devices", "events", "output"};

struct Entry {
  std::string key;
  std::string value;
  std::size_t line = 0;
  std::size_t value_column = 0;
};

struct Document {
  std::map<std::string, std::vector<Entry>> sections;
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string describe(const std::vector<ConfigDiagnostic>& diagnostics) {
  std::string out;
  for (const auto& d : diagnostics) {
    if (!out.empty()) out += "; ";
    out += d.line ? fmt::format("line {}:{}: {}", d.line, d.column, d.message) : d.message;
  }
  return out;
}

Document parse_text(std::string_view text, std::vector<ConfigDiagnostic>& diag) {
  Document doc;
  std::string current;
  std::size_t line_no = 0;
  bool any = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    std::string_view raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string_view line = trim(raw);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    any = true;
    const std::size_t indent = static_cast<std::size_t>(line.data() - raw.data());
    if (line.front() == '[') {
      if (line.back() != ']') {
        diag.push_back({line_no, indent + line.size() + 1, "expected ']' to close the section header"});
        continue;
      }
      const std::string name(trim(line.substr(1, line.size() - 2)));
      if (!kSections.contains(name)) {
        diag.push_back({line_no, indent + 2, fmt::format("unknown section '{}'", name)});
        current.clear();
        continue;
      }
      current = name;
      doc.sections[name];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      diag.push_back({line_no, indent + 1, "expected 'key = value'"});
      continue;
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) {
      diag.push_back({line_no, indent + 1, "missing key before '='"});
      continue;
    }
    if (value.empty()) {
      diag.push_back({line_no, indent + eq + 2, fmt::format("missing value for '{}'", key)});
      continue;
    }
    if (current.empty()) {
      diag.push_back({line_no, indent + 1, "entry outside a section"});
      continue;
    }
    const std::size_t value_col = static_cast<std::size_t>(value.data() - raw.data()) + 1;
    doc.sections[current].push_back({std::string(key), std::string(value), line_no, value_col});
    if (end == text.size()) break;
  }
  if (!any) diag.push_back({1, 1, "empty configuration"});
  return doc;
}

std::string json_scalar(const nlohmann::ordered_json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string out;
    for (const auto& x : v) {
      if (!out.empty()) out += ' ';
      out += json_scalar(x);
    }
    return out;
  }
  return v.dump();
}

Document parse_json(std::string_view text, std::vector<ConfigDiagnostic>& diag) {
  Document doc;
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t offset = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    const std::size_t line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + offset, '\n'));
    const auto nl = text.rfind('\n', offset == 0 ? 0 : offset - 1);
    const std::size_t column = nl == std::string_view::npos || offset == 0 ? offset + 1 : offset - nl;
    diag.push_back({line, column, "invalid JSON"});
    return doc;
  }
  if (!j.is_object()) {
    diag.push_back({1, 1, "JSON configuration must be an object"});
    return doc;
  }
  for (const auto& [name, body] : j.items()) {
    if (!kSections.contains(name)) {
      diag.push_back({0, 0, fmt::format("unknown section '{}'", name)});
      continue;
    }
    if (!body.is_object()) {
      diag.push_back({0, 0, fmt::format("section '{}' must be an object", name)});
      continue;
    }
    auto& entries = doc.sections[name];
    for (const auto& [key, value] : body.items()) entries.push_back({key, json_scalar(value), 0, 0});
  }
  if (doc.sections.empty()) diag.push_back({1, 1, "empty configuration"});
  return doc;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = std::min(s.find(sep, start), s.size());
    const auto part = trim(s.substr(start, end - start));
    if (!part.empty()) out.emplace_back(part);
    start = end + 1;
  }
  return out;
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

class Builder {
 public:
  explicit Builder(std::vector<ConfigDiagnostic>& diag) : diag_(diag) {}

  ExchangeScenario build(const Document& doc, std::optional<std::string>& output_dir) {
    ExchangeScenario s;
    s.devices.clear();
    s.events.clear();
    s.initial_packets.clear();
    s.runs = 1000;
    s.seed = 0;

    for (const auto& e : section(doc, "physics")) {
      if (e.key == "hbar") {
        number(e, e.value, s.hbar, true);
      } else if (e.key == "n_sigma") {
        number(e, e.value, s.n_sigma, true);
      } else if (e.key == "evolution") {
        if (e.value == "frozen") {
          s.evolution = Evolution::Frozen;
        } else if (e.value == "free") {
          s.evolution = Evolution::Free;
        } else {
          error(e, "evolution must be 'frozen' or 'free'");
        }
      } else {
        unknown_key(e, "physics");
      }
    }

    for (const auto& e : section(doc, "run")) {
      if (e.key == "runs") {
        std::uint64_t n = 0;
        if (integer(e, n)) {
          if (n < 1) error(e, "runs must be at least 1");
          s.runs = n;
        }
      } else if (e.key == "seed") {
        integer(e, s.seed);
      } else if (e.key == "dt") {
        double dt = 0;
        if (number(e, e.value, dt, true)) s.dt = dt;
      } else if (e.key == "t_end") {
        double t = 0;
        if (number(e, e.value, t, false)) s.t_end = t;
      } else {
        unknown_key(e, "run");
      }
    }

    for (const auto& e : section(doc, "output")) {
      if (e.key == "dir") {
        output_dir = e.value;
      } else {
        unknown_key(e, "output");
      }
    }

    std::set<std::string> dof_ids;
    for (const auto& e : section(doc, "dofs")) {
      const auto w = words(e.value);
      Dof dof{e.key, DofRole::Particle, 1.0};
      if (w.empty() || w.size() > 2 || (w[0] != "particle" && w[0] != "pointer")) {
        error(e, "expected 'particle|pointer [mass]'");
        continue;
      }
      dof.role = w[0] == "pointer" ? DofRole::Pointer : DofRole::Particle;
      if (w.size() == 2 && !number(e, w[1], dof.mass, true)) continue;
      if (!dof_ids.insert(e.key).second) {
        error(e, fmt::format("dof '{}' declared twice", e.key));
        continue;
      }
      s.dofs.push_back(dof);
    }
    if (s.dofs.empty()) missing("dofs", "at least one dof");

    for (const auto& e : section(doc, "packets")) {
      const auto w = words(e.value);
      if (w.size() < 2 || w.size() > 4) {
        error(e, "expected 'center sigma [wavenumber [phase]]'");
        continue;
      }
      double v[4] = {0, 0, 0, 0};
      bool ok = true;
      for (std::size_t i = 0; i < w.size(); ++i) ok = number(e, w[i], v[i], i == 1) && ok;
      if (!ok) continue;
      if (!s.packets.emplace(e.key, GaussianPacket::make(v[0], v[1], v[2], v[3])).second) {
        error(e, fmt::format("packet '{}' defined twice", e.key));
      }
    }

    std::map<std::string, const Entry*> initial;
    for (const auto& e : section(doc, "initial")) {
      if (e.key == "state") {
        s.initial_state = e.value;
        try {
          parse_state(e.value);
        } catch (const ParseError& p) {
          diag_.push_back({e.line, e.value_column + p.column(), fmt::format("state expression: {}", p.detail())});
        } catch (const Error& x) {
          error(e, fmt::format("state expression: {}", x.what()));
        }
      } else if (dof_ids.contains(e.key)) {
        initial[e.key] = &e;
      } else {
        error(e, fmt::format("'{}' is not a declared dof", e.key));
      }
    }
    for (const auto& d : s.dofs) {
      const auto it = initial.find(d.id);
      if (it == initial.end()) {
        missing("initial", fmt::format("an initial packet for dof '{}'", d.id));
        s.initial_packets.emplace_back();
        continue;
      }
      require_packet(s, *it->second, it->second->value);
      s.initial_packets.push_back(it->second->value);
    }

    std::map<std::string, const Entry*> device_entries;
    for (const auto& e : section(doc, "devices")) {
      if (device_entries.contains(e.key)) {
        error(e, fmt::format("device '{}' declared twice", e.key));
        continue;
      }
      if (auto d = device(s, e, dof_ids)) {
        device_entries[e.key] = &e;
        s.devices.push_back(std::move(*d));
      }
    }

    std::set<double> times;
    for (const auto& e : section(doc, "events")) {
      double t = 0;
      if (!number(e, e.key, t, false, true)) continue;
      if (t < 0) {
        error(e, "event times must be non-negative", true);
        continue;
      }
      if (!times.insert(t).second) {
        error(e, fmt::format("two events at t = {}", e.key), true);
        continue;
      }
      if (!device_entries.contains(e.value)) {
        error(e, fmt::format("undefined device '{}'", e.value));
        continue;
      }
      s.events.push_back({t, e.value});
    }
    std::sort(s.events.begin(), s.events.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
    if (section(doc, "events").empty()) missing("events", "at least one event");

    if (!diag_.empty()) return s;

    // Device construction checks packet roles and disjointness.
    for (const auto& d : s.devices) {
      try {
        build_rewrite(s, d, 0.0);
      } catch (const Error& x) {
        const Entry& e = *device_entries.at(d.name);
        if (x.kind() == ErrorKind::NonDisjointOutputs) {
          error(e, fmt::format("disjointness violated: {}", x.what()));
        } else {
          error(e, x.what());
        }
      }
    }
    if (!diag_.empty()) return s;
    try {
      validate(s);
    } catch (const Error& x) {
      diag_.push_back({0, 0, x.what()});
    }
    return s;
  }

 private:
  std::vector<ConfigDiagnostic>& diag_;
  static inline const std::vector<Entry> kEmpty{};

  static const std::vector<Entry>& section(const Document& doc, const std::string& name) {
    const auto it = doc.sections.find(name);
    return it == doc.sections.end() ? kEmpty : it->second;
  }

  void error(const Entry& e, std::string message, bool at_key = false) {
    diag_.push_back({e.line, e.line ? (at_key ? 1 : e.value_column) : 0, std::move(message)});
  }

  void unknown_key(const Entry& e, const char* sec) {
    error(e, fmt::format("unknown key '{}' in [{}]", e.key, sec), true);
  }

  void missing(const char* sec, const std::string& what) {
    diag_.push_back({1, 1, fmt::format("[{}] needs {}", sec, what)});
  }

  bool number(const Entry& e, std::string_view text, double& out, bool positive, bool at_key = false) {
    double v = 0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    if (!text.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
      error(e, fmt::format("'{}' is not a number", text), at_key);
      return false;
    }
    if (positive && !(v > 0)) {
      error(e, fmt::format("'{}' must be positive", text), at_key);
      return false;
    }
    out = v;
    return true;
  }

  bool integer(const Entry& e, std::uint64_t& out) {
    const auto* first = e.value.data();
    const auto* last = e.value.data() + e.value.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) {
      error(e, fmt::format("'{}' is not a non-negative integer", e.value));
      return false;
    }
    return true;
  }

  bool require_packet(const ExchangeScenario& s, const Entry& e, const std::string& name) {
    if (s.packets.contains(name)) return true;
    error(e, fmt::format("undefined packet '{}'", name));
    return false;
  }

  std::optional<DeviceSpec> device(const ExchangeScenario& s, const Entry& e, const std::set<std::string>& dof_ids) {
    const auto w = words(e.value);
    DeviceSpec d;
    d.name = e.key;
    if (w.empty()) {
      error(e, "missing device kind");
      return std::nullopt;
    }
    if (w[0] == "bellometer") {
      d.kind = DeviceKind::Bellometer;
    } else if (w[0] == "stern_gerlach") {
      d.kind = DeviceKind::SternGerlach;
    } else if (w[0] == "recombine") {
      d.kind = DeviceKind::Recombine;
    } else {
      error(e, fmt::format("unknown device kind '{}'", w[0]));
      return std::nullopt;
    }
    std::map<std::string, std::string> kv;
    for (std::size_t i = 1; i < w.size(); ++i) {
      const auto eq = w[i].find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == w[i].size()) {
        error(e, fmt::format("expected key=value, got '{}'", w[i]));
        return std::nullopt;
      }
      kv[w[i].substr(0, eq)] = w[i].substr(eq + 1);
    }
    bool ok = true;
    const auto take = [&](const std::string& key) -> std::optional<std::string> {
      const auto it = kv.find(key);
      if (it == kv.end()) {
        error(e, fmt::format("{} '{}' needs {}=", w[0], d.name, key));
        ok = false;
        return std::nullopt;
      }
      std::string v = it->second;
      kv.erase(it);
      return v;
    };
    const auto slots = [&](const std::string& key, std::size_t count) {
      const auto v = take(key);
      if (!v) return;
      for (const auto& part : split(*v, ',')) {
        int slot = 0;
        const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), slot);
        if (ec != std::errc() || ptr != part.data() + part.size() || slot < 1) {
          error(e, fmt::format("'{}' is not a slot number", part));
          ok = false;
          return;
        }
        d.slots.push_back(slot);
      }
      if (d.slots.size() != count) {
        error(e, fmt::format("{} needs {} slot(s)", key, count));
        ok = false;
      }
    };
    const auto dofs = [&](const std::string& key, std::size_t count) {
      const auto v = take(key);
      if (!v) return;
      const auto parts = split(*v, ',');
      if (parts.size() != count) {
        error(e, fmt::format("{} needs {} dof(s)", key, count));
        ok = false;
        return;
      }
      for (const auto& p : parts) {
        if (!dof_ids.contains(p)) {
          error(e, fmt::format("undefined dof '{}'", p));
          ok = false;
        }
        d.dofs.push_back(p);
      }
    };
    const auto packet = [&](const std::string& key, const std::string& role) {
      const auto v = take(key);
      if (!v) return;
      if (!require_packet(s, e, *v)) ok = false;
      d.packets[role] = *v;
    };

    switch (d.kind) {
      case DeviceKind::Bellometer: {
        slots("slots", 2);
        dofs("dofs", 2);
        dofs("pointer", 1);
        packet("ready", "ready");
        for (const char* k : {"alpha", "beta", "gamma", "delta"}) packet(k, k);
        if (const auto bins = take("dustbins")) {
          const auto parts = split(*bins, ',');
          if (parts.size() != 2) {
            error(e, "dustbins needs two packets");
            ok = false;
          } else {
            for (std::size_t i = 0; i < 2; ++i) {
              if (!require_packet(s, e, parts[i])) ok = false;
              d.packets[i == 0 ? "dustbin_i" : "dustbin_j"] = parts[i];
            }
          }
        }
        break;
      }
      case DeviceKind::SternGerlach:
        slots("slot", 1);
        dofs("dof", 1);
        packet("a", "a");
        packet("b", "b");
        if (kv.contains("ready")) packet("ready", "ready");
        break;
      case DeviceKind::Recombine:
        slots("slots", 2);
        dofs("pointer", 1);
        packet("ready", "ready");
        for (const char* k : {"alpha", "beta", "gamma", "delta"}) packet(k, k);
        break;
    }
    for (const auto& [key, value] : kv) {
      error(e, fmt::format("unknown {} parameter '{}'", w[0], key));
      ok = false;
    }
    if (!ok) return std::nullopt;
    return d;
  }
};

}  // namespace

ConfigError::ConfigError(ErrorKind kind, std::vector<ConfigDiagnostic> diagnostics)
    : Error(kind, describe(diagnostics)), diagnostics_(std::move(diagnostics)) {}

ScenarioConfig parse_config(std::string_view text) {
  std::vector<ConfigDiagnostic> diag;
  const auto first = text.find_first_not_of(" \t\r\n");
  const bool json = first != std::string_view::npos && text[first] == '{';
  const Document doc = json ? parse_json(text, diag) : parse_text(text, diag);
  if (!diag.empty()) throw ConfigError(ErrorKind::Parse, std::move(diag));
  ScenarioConfig config;
  config.text = std::string(text);
  config.scenario = Builder(diag).build(doc, config.output_dir);
  if (!diag.empty()) throw ConfigError(ErrorKind::InvalidArgument, std::move(diag));
  return config;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidArgument, fmt::format("cannot read '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::uint64_t config_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace pilotwave
