#include "drmel/datasets.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace drmel {

TwoSampleData cyclosporine_split() {
  const std::vector<double> hplc = {77,  87,  93,  109, 109, 129, 130, 153, 156, 159,
                                    185, 198, 203, 227, 244, 245, 271, 280, 285, 318,
                                    336, 339, 340, 440, 498, 521, 556, 578};
  const std::vector<double> ria = {38,  98,  108, 109, 111, 118, 125, 130, 144, 149,
                                   162, 165, 169, 172, 204, 218, 234, 235, 293, 294,
                                   303, 311, 341, 376, 404, 406, 477, 679};
  return TwoSampleData::from_groups(hplc, ria);
}

std::uint64_t data_digest(const TwoSampleData& data) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  char buf[64];
  for (int k = 0; k < data.n(); ++k) {
    feed(std::to_string(data.group()[k]));
    for (int c = 0; c < data.dx(); ++c) {
      std::snprintf(buf, sizeof buf, ",%.17g", data.values()(k, c));
      feed(buf);
    }
    feed("\n");
  }
  return h;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    const auto a = cell.find_first_not_of(" \t\r");
    const auto b = cell.find_last_not_of(" \t\r");
    out.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

TwoSampleData parse_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorKind::ParseError, "row 1: missing header");
  const auto header = split_line(line);
  int gcol = -1;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == "group") gcol = static_cast<int>(j);
  if (gcol < 0) throw Error(ErrorKind::MissingGroupColumn, "header has no `group` column");
  const int nv = static_cast<int>(header.size()) - 1;
  if (nv < 1) throw Error(ErrorKind::ParseError, "row 1: no value columns");
  std::vector<std::vector<double>> rows;
  std::vector<int> groups;
  int rowno = 1;
  while (std::getline(is, line)) {
    ++rowno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      std::ostringstream os;
      os << "row " << rowno << ": expected " << header.size() << " fields, got " << cells.size();
      throw Error(ErrorKind::ParseError, os.str());
    }
    std::vector<double> v;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      std::size_t used = 0;
      double val = 0.0;
      try {
        val = std::stod(cells[j], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cells[j].size() || cells[j].empty() || !std::isfinite(val)) {
        std::ostringstream os;
        os << "row " << rowno << ": cannot parse '" << cells[j] << "' in column " << header[j];
        throw Error(ErrorKind::ParseError, os.str());
      }
      if (static_cast<int>(j) == gcol) {
        if (val != 0.0 && val != 1.0) {
          std::ostringstream os;
          os << "row " << rowno << ": group must be 0 or 1";
          throw Error(ErrorKind::ParseError, os.str());
        }
        groups.push_back(static_cast<int>(val));
      } else {
        v.push_back(val);
      }
    }
    rows.push_back(std::move(v));
  }
  Mat m(static_cast<Eigen::Index>(rows.size()), nv);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < nv; ++j) m(static_cast<Eigen::Index>(i), j) = rows[i][j];
  return TwoSampleData(std::move(m), std::move(groups));
}

TwoSampleData load_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::ParseError, "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_csv(ss.str());
}

void write_csv(const TwoSampleData& data, const std::string& path,
               const std::vector<std::string>& names) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::InvalidArgument, "cannot write " + path);
  f << "group";
  for (int c = 0; c < data.dx(); ++c)
    f << "," << (c < static_cast<int>(names.size()) ? names[c] : "x" + std::to_string(c));
  f << "\n";
  char buf[64];
  for (int k = 0; k < data.n(); ++k) {
    f << data.group()[k];
    for (int c = 0; c < data.dx(); ++c) {
      std::snprintf(buf, sizeof buf, ",%.17g", data.values()(k, c));
      f << buf;
    }
    f << "\n";
  }
}

}  // namespace drmel
