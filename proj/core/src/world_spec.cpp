#include "upl/world_spec.hpp"

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include "upl/errors.hpp"

namespace upl {
namespace {

struct LineReader {
  std::istream& in;
  std::size_t line_number = 0;

  // Next non-blank line with comments stripped.
  std::optional<std::string> next() {
    std::string line;
    while (std::getline(in, line)) {
      ++line_number;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      if (line.find_first_not_of(" \t\r") != std::string::npos) return line;
    }
    return std::nullopt;
  }
};

CellTable read_table(LineReader& reader, std::size_t users, std::size_t items, const char* name) {
  if (users == 0 || items == 0) {
    throw ParseError(std::string("'") + name + "' block before 'users' and 'items'",
                     reader.line_number);
  }
  CellTable table(users, items);
  for (std::size_t u = 0; u < users; ++u) {
    const auto line = reader.next();
    if (!line) throw ParseError(std::string("unexpected end of '") + name + "' block", reader.line_number);
    std::istringstream ss(*line);
    for (std::size_t i = 0; i < items; ++i) {
      if (!(ss >> table(u, i))) {
        throw ParseError(std::string("expected ") + std::to_string(items) + " values in '" + name +
                             "' row",
                         reader.line_number);
      }
    }
    std::string extra;
    if (ss >> extra) throw ParseError(std::string("too many values in '") + name + "' row", reader.line_number);
  }
  return table;
}

}  // namespace

WorldSpec parse_world_spec(std::istream& in) {
  LineReader reader{in};
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t dim = 4;
  std::optional<CellTable> theta, gamma, scores;
  WorldSpec spec;
  while (const auto line = reader.next()) {
    std::istringstream ss(*line);
    std::string key;
    ss >> key;
    auto read_count = [&](std::size_t& out) {
      long long v = 0;
      if (!(ss >> v) || v <= 0) throw ParseError("'" + key + "' needs a positive integer", reader.line_number);
      out = static_cast<std::size_t>(v);
    };
    if (key == "users") {
      read_count(users);
    } else if (key == "items") {
      read_count(items);
    } else if (key == "dim") {
      read_count(dim);
    } else if (key == "seed") {
      if (!(ss >> spec.seed)) throw ParseError("'seed' needs an integer", reader.line_number);
    } else if (key == "theta") {
      theta = read_table(reader, users, items, "theta");
    } else if (key == "gamma") {
      gamma = read_table(reader, users, items, "gamma");
    } else if (key == "scores") {
      scores = read_table(reader, users, items, "scores");
    } else {
      throw ParseError("unknown key '" + key + "'", reader.line_number);
    }
  }
  if (!theta || !gamma) throw ParseError("world spec needs both 'theta' and 'gamma' blocks", 0);
  if (theta->num_users != users || theta->num_items != items || gamma->num_users != users ||
      gamma->num_items != items || (scores && (scores->num_users != users || scores->num_items != items))) {
    throw ParseError("'users'/'items' changed after a table was read", 0);
  }
  spec.world = {std::move(*theta), std::move(*gamma)};
  spec.world.validate();
  if (scores) {
    spec.scores = std::move(*scores);
  } else {
    spec.scores = CellTable::scores_of(init_model(users, items, dim, spec.seed, 1.0));
  }
  return spec;
}

WorldSpec load_world_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return parse_world_spec(in);
}

std::string format_world_spec(const WorldSpec& spec) {
  std::ostringstream out;
  out << "users " << spec.world.num_users() << "\nitems " << spec.world.num_items() << "\nseed "
      << spec.seed << '\n';
  char buf[64];
  auto table = [&](const char* name, const CellTable& t) {
    out << name << '\n';
    for (std::size_t u = 0; u < t.num_users; ++u) {
      for (std::size_t i = 0; i < t.num_items; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", t(u, i));
        out << (i ? " " : "") << buf;
      }
      out << '\n';
    }
  };
  table("theta", spec.world.theta);
  table("gamma", spec.world.gamma);
  table("scores", spec.scores);
  return out.str();
}

}  // namespace upl
