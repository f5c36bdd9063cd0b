#pragma once

#include <boost/property_tree/ptree.hpp>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "isq/evolution.hpp"

namespace isq {

// Sectioned key-value text:
//   [mesh]
//   n = 128
// Keys are addressed as "section.key".
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  // "section.key=value"
  void set(const std::string& key, const std::string& value);
  void apply_override(const std::string& assignment);
  bool has(const std::string& key) const;
  std::string text() const;

  std::string get_string(const std::string& key, const std::string& def) const;
  double get_double(const std::string& key, double def) const;
  int get_int(const std::string& key, int def) const;
  bool get_bool(const std::string& key, bool def) const;
  // Comma-separated numbers.
  std::vector<double> get_list(const std::string& key, const std::vector<double>& def) const;

 private:
  boost::property_tree::ptree tree_;
};

struct ExperimentConfig {
  std::string study;
  Domain domain;
  double sigma = -0.5;
  int n = 128;
  double gamma = 2.0;
  int n_theta = 0;
  TimeGrid time;
  std::uint64_t seed = 1;
  std::string output;
  Config raw;

  // Reads the common sections and range-checks them; messages name the field.
  static ExperimentConfig from(const Config& c);
};

const std::vector<std::string>& study_names();

// Scientific notation with 17 significant digits.
std::string format_double(double v);

// RFC 4180 style writer with a header row.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void row(const std::vector<double>& values);
  void row(const std::vector<std::string>& cells);

 private:
  std::ofstream out_;
  size_t width_ = 0;
};

}  // namespace isq
