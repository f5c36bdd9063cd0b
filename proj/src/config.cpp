#include "isq/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace isq {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n"), b = s.find_last_not_of(" \t\r\n");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& s) {
  std::string t = trim(s);
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (t.empty() || pos != t.size()) throw InvalidArgument(key + ": expected a number, got '" + s + "'");
  return v;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config c;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, c.tree_);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw InvalidArgument("config: line " + std::to_string(e.line()) + ": " + e.message());
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("config: cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void Config::set(const std::string& key, const std::string& value) {
  size_t dot = key.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == key.size() || key.find('.', dot + 1) != std::string::npos)
    throw InvalidArgument(key + ": keys take the form section.key");
  tree_.put(key, trim(value));
}

void Config::apply_override(const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos) throw InvalidArgument(assignment + ": overrides take the form section.key=value");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

bool Config::has(const std::string& key) const { return static_cast<bool>(tree_.get_optional<std::string>(key)); }

std::string Config::text() const {
  std::ostringstream out;
  boost::property_tree::ini_parser::write_ini(out, tree_);
  return out.str();
}

std::string Config::get_string(const std::string& key, const std::string& def) const {
  auto v = tree_.get_optional<std::string>(key);
  return v ? trim(*v) : def;
}

double Config::get_double(const std::string& key, double def) const {
  auto v = tree_.get_optional<std::string>(key);
  return v ? to_double(key, *v) : def;
}

int Config::get_int(const std::string& key, int def) const {
  auto v = tree_.get_optional<std::string>(key);
  if (!v) return def;
  double d = to_double(key, *v);
  if (d != std::floor(d) || std::abs(d) > 2e9) throw InvalidArgument(key + ": expected an integer, got '" + *v + "'");
  return static_cast<int>(d);
}

bool Config::get_bool(const std::string& key, bool def) const {
  auto v = tree_.get_optional<std::string>(key);
  if (!v) return def;
  std::string s = trim(*v);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw InvalidArgument(key + ": expected true or false, got '" + s + "'");
}

std::vector<double> Config::get_list(const std::string& key, const std::vector<double>& def) const {
  auto v = tree_.get_optional<std::string>(key);
  if (!v) return def;
  std::vector<double> out;
  std::stringstream ss(*v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, item));
  if (out.empty()) throw InvalidArgument(key + ": empty list");
  return out;
}

const std::vector<std::string>& study_names() {
  static const std::vector<std::string> names = {"bdf",   "hardy",    "evolve",       "trace",
                                                 "carleman", "control", "observability"};
  return names;
}

ExperimentConfig ExperimentConfig::from(const Config& c) {
  ExperimentConfig e;
  e.raw = c;
  e.study = c.get_string("run.study", "");
  bool known = false;
  for (const auto& s : study_names()) known = known || s == e.study;
  if (!known) throw InvalidArgument("run.study: unknown study '" + e.study + "'");
  int seed = c.get_int("run.seed", 1);
  if (seed < 0) throw InvalidArgument("run.seed: must be nonnegative");
  e.seed = static_cast<std::uint64_t>(seed);
  e.output = c.get_string("run.output", "");

  std::string kind = c.get_string("domain.kind", "interval");
  DomainKind k;
  try {
    k = parse_domain_kind(kind);
  } catch (const std::exception&) {
    throw InvalidArgument("domain.kind: unknown domain '" + kind + "'");
  }
  if (k == DomainKind::Oval) throw InvalidArgument("domain.kind: only interval and disk domains are meshed");
  double d0 = c.get_double("domain.d0", 0.2);
  std::vector<double> dp;
  if (k == DomainKind::Interval)
    dp = {c.get_double("domain.a", 0.0), c.get_double("domain.b", 1.0)};
  else
    dp = {c.get_double("domain.radius", 1.0)};
  try {
    e.domain = make_domain(k, dp, d0);
  } catch (const std::exception& ex) {
    throw InvalidArgument(std::string("domain: ") + ex.what());
  }

  e.sigma = c.get_double("params.sigma", -0.5);
  if (!(e.sigma > -0.75 && e.sigma < 0.0)) throw InvalidArgument("params.sigma: must lie in (-3/4, 0)");

  e.n = c.get_int("mesh.n", k == DomainKind::Interval ? 128 : 48);
  if (e.n < 16) throw InvalidArgument("mesh.n: must be at least 16");
  if (k == DomainKind::Interval && e.n % 2) throw InvalidArgument("mesh.n: must be even on the interval");
  e.gamma = c.get_double("mesh.gamma", 2.0);
  if (!(e.gamma >= 1.0 && e.gamma <= 4.0)) throw InvalidArgument("mesh.gamma: must lie in [1, 4]");
  e.n_theta = c.get_int("mesh.n_theta", k == DomainKind::Interval ? 0 : 64);
  if (k == DomainKind::Disk && e.n_theta < 8) throw InvalidArgument("mesh.n_theta: must be at least 8");

  e.time.T = c.get_double("time.T", 1.0);
  if (!(e.time.T > 0.0)) throw InvalidArgument("time.T: must be positive");
  e.time.steps = c.get_int("time.steps", 200);
  if (e.time.steps < 2) throw InvalidArgument("time.steps: must be at least 2");
  std::string sch = c.get_string("time.scheme", "implicit-euler");
  try {
    e.time.scheme = parse_scheme(sch);
  } catch (const std::exception&) {
    throw InvalidArgument("time.scheme: unknown scheme '" + sch + "'");
  }
  e.time.rannacher = c.get_int("time.rannacher", 2);
  if (e.time.rannacher < 0) throw InvalidArgument("time.rannacher: must be nonnegative");
  return e;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path), width_(header.size()) {
  if (!out_) throw std::runtime_error("csv: cannot write " + path);
  row(header);
}

void CsvWriter::row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  for (double v : values) cells.push_back(format_double(v));
  row(cells);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_) throw InvalidArgument("csv: row width does not match the header");
  for (size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << csv_cell(cells[i]);
  out_ << "\r\n";
}

}  // namespace isq
