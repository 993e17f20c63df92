// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <cmath>
#include <fstream>

#include "shortft/harness.hpp"

namespace shortft {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

CsvTable::CsvTable(std::filesystem::path path, std::vector<std::string> header,
                   std::size_t flush_every)
    : path_(std::move(path)), header_(std::move(header)), flush_every_(flush_every) {
  flush();
}

CsvTable::~CsvTable() {
  try {
    if (unflushed_ > 0) flush();
  } catch (...) {
    // Destructors must not throw; the last complete flush stays on disk.
  }
}

void CsvTable::add(std::vector<std::string> row) {
  if (row.size() != header_.size()) {
    throw std::invalid_argument("csv: row has " + std::to_string(row.size()) + " fields, header " +
                                std::to_string(header_.size()));
  }
  for (const std::string& f : row) {
    if (f.find_first_of(",\n\"") != std::string::npos) {
      throw std::invalid_argument("csv: field '" + f + "' needs quoting");
    }
  }
  rows_.push_back(std::move(row));
  ++unflushed_;
  if (flush_every_ > 0 && unflushed_ >= flush_every_) flush();
}

void CsvTable::flush() {
  const std::filesystem::path tmp = path_.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::trunc);
    if (!f) throw std::runtime_error("csv: cannot write " + tmp.string());
    auto line = [&](const std::vector<std::string>& fields) {
      for (std::size_t i = 0; i < fields.size(); ++i) f << (i ? "," : "") << fields[i];
      f << '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    if (!f) throw std::runtime_error("csv: short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path_);
  unflushed_ = 0;
}

}  // namespace shortft
