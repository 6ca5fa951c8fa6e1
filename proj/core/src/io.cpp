#include "rdsmdr/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rdsmdr/error.hpp"

namespace rdsmdr {

using nlohmann::json;

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, const std::string& what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    fail_data("cannot parse '" + std::string(s) + "' as a number for " + what);
  return v;
}

namespace {

long parse_long(std::string_view s, const std::string& what) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    fail_data("cannot parse '" + std::string(s) + "' as an integer for " + what);
  return v;
}

std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_csv(const std::string& line, const std::string& where) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t p = 0; p < line.size(); ++p) {
    const char ch = line[p];
    if (quoted) {
      if (ch == '"') {
        if (p + 1 < line.size() && line[p + 1] == '"') {
          cur += '"';
          ++p;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"' && cur.empty()) {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (quoted) fail_data(where + ": unterminated quote");
  cells.push_back(std::move(cur));
  return cells;
}

std::vector<std::string> read_lines(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::string spot(const std::string& path, std::size_t lineno) {
  return path + ":" + std::to_string(lineno + 1);
}

void expect_cells(const std::vector<std::string>& cells, std::size_t count,
                  const std::string& where) {
  if (cells.size() != count)
    fail_data(where + ": expected " + std::to_string(count) + " cells, found " +
              std::to_string(cells.size()));
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_data("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail_data("error while reading '" + path + "'");
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("cannot open '" + path + "' for writing");
  out << content;
  if (!out) fail_data("error while writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Population files
// ---------------------------------------------------------------------------

void write_population(const Population& pop, const std::string& nodes_path,
                      const std::string& edges_path) {
  for (const auto& [name, col] : pop.numeric_attrs())
    if (name == "id" || name == "age" || name == "z")
      fail_data("attribute name '" + name + "' collides with a fixed node column");
  for (const auto& [name, col] : pop.categorical_attrs())
    if (name == "id" || name == "age" || name == "z")
      fail_data("attribute name '" + name + "' collides with a fixed node column");

  std::string nodes = "id,age,z";
  for (const auto& [name, col] : pop.numeric_attrs()) nodes += "," + csv_escape(name);
  for (const auto& [name, col] : pop.categorical_attrs()) nodes += "," + csv_escape(name);
  nodes += '\n';
  for (std::size_t i = 0; i < pop.size(); ++i) {
    nodes += std::to_string(i);
    nodes += ',' + format_double(pop.ages()[i]);
    nodes += ',' + std::to_string(static_cast<int>(pop.infection()[i]));
    for (const auto& [name, col] : pop.numeric_attrs()) nodes += ',' + format_double(col[i]);
    for (const auto& [name, col] : pop.categorical_attrs())
      nodes += ',' + csv_escape(col.levels[static_cast<std::size_t>(col.codes[i])]);
    nodes += '\n';
  }
  write_text_file(nodes_path, nodes);

  std::string edges = "src,dst\n";
  for (std::size_t i = 0; i < pop.size(); ++i)
    for (NodeId j : pop.neighbors(static_cast<NodeId>(i)))
      if (static_cast<std::size_t>(j) > i)
        edges += std::to_string(i) + ',' + std::to_string(j) + '\n';
  write_text_file(edges_path, edges);
}

Population read_population(const std::string& nodes_path, const std::string& edges_path) {
  const std::vector<std::string> nlines = read_lines(nodes_path);
  if (nlines.empty()) fail_data(nodes_path + ": empty node table");
  const auto header = split_csv(nlines[0], spot(nodes_path, 0));
  if (header.size() < 3 || header[0] != "id" || header[1] != "age" || header[2] != "z")
    fail_data(nodes_path + ": node table must start with columns id,age,z");
  const std::size_t extra = header.size() - 3;

  std::map<std::string, NodeId> id_of;
  std::vector<double> ages;
  std::vector<std::int8_t> zs;
  std::vector<std::vector<std::string>> raw(extra);
  for (std::size_t l = 1; l < nlines.size(); ++l) {
    const auto cells = split_csv(nlines[l], spot(nodes_path, l));
    expect_cells(cells, header.size(), spot(nodes_path, l));
    if (!id_of.emplace(cells[0], static_cast<NodeId>(ages.size())).second)
      fail_data(spot(nodes_path, l) + ": duplicate node id '" + cells[0] + "'");
    ages.push_back(parse_double(cells[1], "age"));
    const long z = parse_long(cells[2], "z");
    if (z != 0 && z != 1) fail_data(spot(nodes_path, l) + ": z must be 0 or 1");
    zs.push_back(static_cast<std::int8_t>(z));
    for (std::size_t c = 0; c < extra; ++c) raw[c].push_back(cells[3 + c]);
  }

  // A column is numeric when every cell parses; otherwise its distinct values
  // become categorical levels in order of first appearance.
  std::map<std::string, std::vector<double>> numeric;
  std::map<std::string, CategoricalAttr> categorical;
  for (std::size_t c = 0; c < extra; ++c) {
    const std::string& name = header[3 + c];
    std::vector<double> nums;
    nums.reserve(raw[c].size());
    bool all_numeric = true;
    for (const std::string& cell : raw[c]) {
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || cell.empty()) {
        all_numeric = false;
        break;
      }
      nums.push_back(v);
    }
    if (all_numeric) {
      numeric.emplace(name, std::move(nums));
    } else {
      CategoricalAttr attr;
      std::map<std::string, std::int32_t> code_of;
      for (const std::string& cell : raw[c]) {
        auto [it, inserted] = code_of.emplace(cell, static_cast<std::int32_t>(attr.levels.size()));
        if (inserted) attr.levels.push_back(cell);
        attr.codes.push_back(it->second);
      }
      categorical.emplace(name, std::move(attr));
    }
  }

  const std::vector<std::string> elines = read_lines(edges_path);
  if (elines.empty()) fail_data(edges_path + ": empty edge table");
  {
    const auto eh = split_csv(elines[0], spot(edges_path, 0));
    if (eh.size() != 2 || eh[0] != "src" || eh[1] != "dst")
      fail_data(edges_path + ": edge table must have columns src,dst");
  }
  std::vector<std::pair<NodeId, NodeId>> edges;
  edges.reserve(elines.size() - 1);
  for (std::size_t l = 1; l < elines.size(); ++l) {
    const auto cells = split_csv(elines[l], spot(edges_path, l));
    expect_cells(cells, 2, spot(edges_path, l));
    const auto a = id_of.find(cells[0]);
    const auto b = id_of.find(cells[1]);
    if (a == id_of.end()) fail_data(spot(edges_path, l) + ": unknown node id '" + cells[0] + "'");
    if (b == id_of.end()) fail_data(spot(edges_path, l) + ": unknown node id '" + cells[1] + "'");
    edges.emplace_back(a->second, b->second);
  }
  const std::size_t n = ages.size();
  return Population::from_edges(n, edges, std::move(ages), std::move(zs), std::move(numeric),
                                std::move(categorical));
}

// ---------------------------------------------------------------------------
// Recipe and model JSON
// ---------------------------------------------------------------------------

namespace {

json parse_json(const std::string& text, const std::string& what, ErrorKind kind) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(kind, what + ": malformed JSON");
  return j;
}

// Converts value/type mismatches inside the parse body into the document's
// error kind, so a recipe with "n": "x" is a config error, not a crash.
template <typename F>
auto guard_json(const std::string& what, ErrorKind kind, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(kind, what + ": " + e.what());
  }
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& what, ErrorKind kind) {
  if (!obj.is_object()) throw Error(kind, what + ": expected a JSON object");
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw Error(kind, what + ": unknown key '" + item.key() + "'");
  }
}

}  // namespace

std::string recipe_to_json(const PopulationRecipe& recipe) {
  json j;
  j["n"] = recipe.n;
  j["age_shape"] = recipe.age_shape;
  j["age_rate"] = recipe.age_rate;
  j["infect_intercept"] = recipe.infect_intercept;
  j["infect_slope"] = recipe.infect_slope;
  j["ergm"] = {{"eta1", recipe.ergm.eta1}, {"eta2", recipe.ergm.eta2}};
  j["max_retries"] = recipe.max_retries;
  return j.dump(2) + "\n";
}

PopulationRecipe recipe_from_json(const std::string& text) {
  return guard_json("population recipe", ErrorKind::config, [&] {
  const json j = parse_json(text, "population recipe", ErrorKind::config);
  check_keys(j,
             {"n", "age_shape", "age_rate", "infect_intercept", "infect_slope", "ergm",
              "max_retries"},
             "population recipe", ErrorKind::config);
  PopulationRecipe r;
  if (j.contains("n")) r.n = j["n"].get<std::size_t>();
  if (j.contains("age_shape")) r.age_shape = j["age_shape"].get<double>();
  if (j.contains("age_rate")) r.age_rate = j["age_rate"].get<double>();
  if (j.contains("infect_intercept")) r.infect_intercept = j["infect_intercept"].get<double>();
  if (j.contains("infect_slope")) r.infect_slope = j["infect_slope"].get<double>();
  if (j.contains("ergm")) {
    check_keys(j["ergm"], {"eta1", "eta2"}, "population recipe ergm", ErrorKind::config);
    if (j["ergm"].contains("eta1")) r.ergm.eta1 = j["ergm"]["eta1"].get<double>();
    if (j["ergm"].contains("eta2")) r.ergm.eta2 = j["ergm"]["eta2"].get<double>();
  }
  if (j.contains("max_retries")) r.max_retries = j["max_retries"].get<int>();
  return r;
  });
}

namespace {

const char* fn_name(CovariateSpec::Fn fn) {
  switch (fn) {
    case CovariateSpec::Fn::attribute_of_recruit: return "attribute_of_recruit";
    case CovariateSpec::Fn::product_of_recruit_attributes: return "product_of_recruit_attributes";
    case CovariateSpec::Fn::abs_age_difference: return "abs_age_difference";
    case CovariateSpec::Fn::indicator_same_attribute: return "indicator_same_attribute";
    case CovariateSpec::Fn::custom_table: return "custom_table";
  }
  return "?";
}

CovariateSpec::Fn parse_fn(const std::string& name) {
  if (name == "attribute_of_recruit") return CovariateSpec::Fn::attribute_of_recruit;
  if (name == "product_of_recruit_attributes")
    return CovariateSpec::Fn::product_of_recruit_attributes;
  if (name == "abs_age_difference") return CovariateSpec::Fn::abs_age_difference;
  if (name == "indicator_same_attribute") return CovariateSpec::Fn::indicator_same_attribute;
  if (name == "custom_table") return CovariateSpec::Fn::custom_table;
  fail_config("unknown covariate function '" + name + "'");
}

CovariateKind kind_of(CovariateSpec::Fn fn) {
  switch (fn) {
    case CovariateSpec::Fn::attribute_of_recruit:
    case CovariateSpec::Fn::product_of_recruit_attributes: return CovariateKind::node_attribute;
    default: return CovariateKind::symmetric_tie_function;
  }
}

}  // namespace

std::string model_to_json(const MDRModel& model) {
  json covs = json::array();
  for (const CovariateSpec& c : model.covariates) {
    json jc;
    jc["name"] = c.name;
    jc["fn"] = fn_name(c.fn);
    jc["attrs"] = c.attrs;
    if (c.fn == CovariateSpec::Fn::custom_table) {
      if (!c.table) fail_config("dyad-table covariate '" + c.name + "' has no table");
      json rows = json::array();
      for (const TieTable::Entry& e : c.table->entries())
        rows.push_back(json::array({e.src, e.dst, e.value}));
      jc["table"] = std::move(rows);
    }
    covs.push_back(std::move(jc));
  }
  json j;
  j["covariates"] = std::move(covs);
  j["beta"] = model.beta;
  return j.dump(2) + "\n";
}

MDRModel model_from_json(const std::string& text) {
  return guard_json("recruitment model", ErrorKind::config, [&] {
  const json j = parse_json(text, "recruitment model", ErrorKind::config);
  check_keys(j, {"covariates", "beta"}, "recruitment model", ErrorKind::config);
  if (!j.contains("covariates") || !j.contains("beta"))
    fail_config("recruitment model: needs both 'covariates' and 'beta'");

  MDRModel model;
  for (const json& jc : j["covariates"]) {
    check_keys(jc, {"name", "fn", "attrs", "table"}, "recruitment model covariate",
               ErrorKind::config);
    if (!jc.contains("fn")) fail_config("recruitment model covariate: missing 'fn'");
    CovariateSpec c;
    c.fn = parse_fn(jc["fn"].get<std::string>());
    c.kind = kind_of(c.fn);
    if (jc.contains("attrs")) c.attrs = jc["attrs"].get<std::vector<std::string>>();
    c.name = jc.contains("name") ? jc["name"].get<std::string>() : std::string(fn_name(c.fn));
    if (c.fn == CovariateSpec::Fn::custom_table) {
      if (!jc.contains("table")) fail_config("dyad-table covariate needs inline 'table' rows");
      std::vector<TieTable::Entry> entries;
      for (const json& row : jc["table"]) {
        if (!row.is_array() || row.size() != 3)
          fail_config("dyad-table rows must be [src, dst, value] triples");
        entries.push_back(
            {row[0].get<NodeId>(), row[1].get<NodeId>(), row[2].get<double>()});
      }
      c.table = std::make_shared<TieTable>(TieTable::from_entries(entries));
    } else if (jc.contains("table")) {
      fail_config("covariate '" + c.name + "' does not take a table");
    }
    model.covariates.push_back(std::move(c));
  }
  model.beta = j["beta"].get<std::vector<double>>();
  model.validate();
  return model;
  });
}

TieTable read_tie_table(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) fail_data(path + ": empty dyad table");
  {
    const auto h = split_csv(lines[0], spot(path, 0));
    if (h.size() != 3 || h[0] != "src" || h[1] != "dst" || h[2] != "value")
      fail_data(path + ": dyad table must have columns src,dst,value");
  }
  std::vector<TieTable::Entry> entries;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const auto cells = split_csv(lines[l], spot(path, l));
    expect_cells(cells, 3, spot(path, l));
    entries.push_back({static_cast<NodeId>(parse_long(cells[0], "src")),
                       static_cast<NodeId>(parse_long(cells[1], "dst")),
                       parse_double(cells[2], "value")});
  }
  return TieTable::from_entries(entries);
}

void write_tie_table(const TieTable& table, const std::string& path) {
  std::string out = "src,dst,value\n";
  for (const TieTable::Entry& e : table.entries())
    out += std::to_string(e.src) + ',' + std::to_string(e.dst) + ',' + format_double(e.value) +
           '\n';
  write_text_file(path, out);
}

// ---------------------------------------------------------------------------
// Sample files
// ---------------------------------------------------------------------------

void write_sample(const RDSSample& sample, const std::string& members_path,
                  const std::string& alters_path) {
  std::set<std::string> member_keys, alter_keys;
  for (const Member& m : sample.members) {
    for (const auto& [k, v] : m.attrs) {
      if (k == "z") {
        if (v != static_cast<double>(m.z))
          fail_data("member attribute 'z' contradicts the z column");
        continue;
      }
      if (k == "node") fail_data("member attribute name 'node' collides with the node column");
      member_keys.insert(k);
    }
    for (const AttrValues& a : m.alters)
      for (const auto& [k, v] : a) alter_keys.insert(k);
  }

  std::string members = "#coupons=" + std::to_string(sample.coupons) + '\n';
  members += "id,recruiter_id,wave,degree,z,node";
  for (const std::string& k : member_keys) members += ',' + csv_escape(k);
  members += '\n';
  for (std::size_t i = 0; i < sample.members.size(); ++i) {
    const Member& m = sample.members[i];
    members += std::to_string(i);
    members += ',';
    if (m.recruiter >= 0) members += std::to_string(m.recruiter);
    members += ',' + std::to_string(m.wave);
    members += ',' + format_double(m.reported_degree);
    members += ',' + std::to_string(m.z);
    members += ',';
    if (m.node >= 0) members += std::to_string(m.node);
    for (const std::string& k : member_keys) {
      members += ',';
      if (const auto it = m.attrs.find(k); it != m.attrs.end()) members += format_double(it->second);
    }
    members += '\n';
  }
  write_text_file(members_path, members);

  std::string alters = "ego_id,alter_index";
  for (const std::string& k : alter_keys) alters += ',' + csv_escape(k);
  alters += '\n';
  for (std::size_t i = 0; i < sample.members.size(); ++i)
    for (std::size_t t = 0; t < sample.members[i].alters.size(); ++t) {
      const AttrValues& a = sample.members[i].alters[t];
      alters += std::to_string(i) + ',' + std::to_string(t);
      for (const std::string& k : alter_keys) {
        alters += ',';
        if (const auto it = a.find(k); it != a.end()) alters += format_double(it->second);
      }
      alters += '\n';
    }
  write_text_file(alters_path, alters);
}

RDSSample read_sample(const std::string& members_path, const std::string& alters_path) {
  std::vector<std::string> lines = read_lines(members_path);
  if (lines.empty()) fail_data(members_path + ": empty member table");

  RDSSample sample;
  std::size_t first = 0;
  long coupons = -1;
  if (lines[0].rfind("#coupons=", 0) == 0) {
    coupons = parse_long(std::string_view(lines[0]).substr(9), "coupons");
    if (coupons < 1) fail_data(members_path + ": coupon cap must be at least 1");
    first = 1;
  }
  if (first >= lines.size()) fail_data(members_path + ": missing member header");
  const auto header = split_csv(lines[first], spot(members_path, first));
  const std::vector<std::string> fixed = {"id", "recruiter_id", "wave", "degree", "z"};
  if (header.size() < fixed.size() ||
      !std::equal(fixed.begin(), fixed.end(), header.begin()))
    fail_data(members_path + ": member table must start with columns id,recruiter_id,wave,degree,z");
  // Simulated samples carry the population node index in an optional sixth
  // column; hand-authored tables may omit it.
  const bool has_node = header.size() > fixed.size() && header[fixed.size()] == "node";
  const std::size_t attrs_from = fixed.size() + (has_node ? 1 : 0);

  std::map<std::string, int> row_of;
  for (std::size_t l = first + 1; l < lines.size(); ++l) {
    const auto cells = split_csv(lines[l], spot(members_path, l));
    expect_cells(cells, header.size(), spot(members_path, l));
    Member m;
    if (!row_of.emplace(cells[0], static_cast<int>(sample.members.size())).second)
      fail_data(spot(members_path, l) + ": duplicate member id '" + cells[0] + "'");
    if (cells[1].empty()) {
      m.recruiter = -1;
    } else {
      const auto it = row_of.find(cells[1]);
      if (it == row_of.end())
        fail_data(spot(members_path, l) + ": recruiter id '" + cells[1] +
                  "' does not name an earlier row");
      m.recruiter = it->second;
    }
    m.wave = static_cast<int>(parse_long(cells[2], "wave"));
    m.reported_degree = parse_double(cells[3], "degree");
    const long z = parse_long(cells[4], "z");
    if (z != 0 && z != 1) fail_data(spot(members_path, l) + ": z must be 0 or 1");
    m.z = static_cast<int>(z);
    m.attrs["z"] = static_cast<double>(z);
    if (has_node && !cells[fixed.size()].empty())
      m.node = static_cast<NodeId>(parse_long(cells[fixed.size()], "node"));
    for (std::size_t c = attrs_from; c < header.size(); ++c)
      if (!cells[c].empty()) m.attrs[header[c]] = parse_double(cells[c], header[c]);
    sample.members.push_back(std::move(m));
  }

  const std::vector<std::string> alines = read_lines(alters_path);
  if (alines.empty()) fail_data(alters_path + ": empty alter table");
  const auto aheader = split_csv(alines[0], spot(alters_path, 0));
  if (aheader.size() < 2 || aheader[0] != "ego_id" || aheader[1] != "alter_index")
    fail_data(alters_path + ": alter table must start with columns ego_id,alter_index");
  for (std::size_t l = 1; l < alines.size(); ++l) {
    const auto cells = split_csv(alines[l], spot(alters_path, l));
    expect_cells(cells, aheader.size(), spot(alters_path, l));
    const auto it = row_of.find(cells[0]);
    if (it == row_of.end())
      fail_data(spot(alters_path, l) + ": unknown ego id '" + cells[0] + "'");
    Member& m = sample.members[static_cast<std::size_t>(it->second)];
    const long idx = parse_long(cells[1], "alter_index");
    if (idx != static_cast<long>(m.alters.size()))
      fail_data(spot(alters_path, l) + ": alter rows of one ego must be contiguous and 0-indexed");
    AttrValues a;
    for (std::size_t c = 2; c < aheader.size(); ++c)
      if (!cells[c].empty()) a[aheader[c]] = parse_double(cells[c], aheader[c]);
    m.alters.push_back(std::move(a));
  }

  if (coupons < 0) {
    std::vector<int> recruits(sample.members.size(), 0);
    for (const Member& m : sample.members)
      if (m.recruiter >= 0) ++recruits[static_cast<std::size_t>(m.recruiter)];
    coupons = 1;
    for (int r : recruits) coupons = std::max(coupons, static_cast<long>(r));
  }
  sample.coupons = static_cast<int>(coupons);
  sample.validate();
  return sample;
}

// ---------------------------------------------------------------------------
// Survey tables
// ---------------------------------------------------------------------------

namespace {

const char* kSurveyHeader =
    "id,recruiter_id,age,male,degree,deg_male,deg_nonmale,"
    "a18,a20,a25,a30,a35,a40,a45,a50,a55,a60,a65,a70,a75,a80";
constexpr std::size_t kSurveyCells = 7 + AgeGroups::count;

}  // namespace

std::vector<RawRecord> read_survey(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) fail_data(path + ": empty survey table");
  {
    const auto h = split_csv(lines[0], spot(path, 0));
    const auto want = split_csv(kSurveyHeader, "survey header");
    if (h != want) fail_data(path + ": survey header must be exactly '" + kSurveyHeader + "'");
  }
  std::vector<RawRecord> records;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const auto cells = split_csv(lines[l], spot(path, l));
    expect_cells(cells, kSurveyCells, spot(path, l));
    RawRecord r;
    r.id = cells[0];
    r.recruiter_id = cells[1];
    r.age = cells[2].empty() ? kNaN : parse_double(cells[2], "age");
    if (cells[3].empty()) {
      r.gender = -1;
    } else {
      const long g = parse_long(cells[3], "male");
      if (g != 0 && g != 1) fail_data(spot(path, l) + ": male must be 0, 1 or empty");
      r.gender = static_cast<int>(g);
    }
    r.report.total = parse_long(cells[4], "degree");
    r.report.by_gender[1] = parse_long(cells[5], "deg_male");
    r.report.by_gender[0] = parse_long(cells[6], "deg_nonmale");
    for (int g = 0; g < AgeGroups::count; ++g)
      r.report.by_age[static_cast<std::size_t>(g)] =
          parse_long(cells[7 + static_cast<std::size_t>(g)], "age bracket count");
    records.push_back(std::move(r));
  }
  return records;
}

void write_survey(const std::vector<RawRecord>& records, const std::string& path) {
  std::string out = std::string(kSurveyHeader) + '\n';
  for (const RawRecord& r : records) {
    out += csv_escape(r.id) + ',' + csv_escape(r.recruiter_id) + ',';
    if (!std::isnan(r.age)) out += format_double(r.age);
    out += ',';
    if (r.gender != -1) out += std::to_string(r.gender);
    out += ',' + std::to_string(r.report.total);
    out += ',' + std::to_string(r.report.by_gender[1]);
    out += ',' + std::to_string(r.report.by_gender[0]);
    for (long c : r.report.by_age) out += ',' + std::to_string(c);
    out += '\n';
  }
  write_text_file(path, out);
}

// ---------------------------------------------------------------------------
// JSON reports
// ---------------------------------------------------------------------------

std::string fit_to_json(const FitResult& fit) {
  json j;
  j["beta_hat"] = fit.beta_hat;
  j["log_lik"] = fit.log_lik;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["gradient_norm"] = fit.gradient_norm;
  j["warnings"] = fit.warnings;
  return j.dump(2) + "\n";
}

FitResult fit_from_json(const std::string& text) {
  return guard_json("fit result", ErrorKind::data, [&] {
  const json j = parse_json(text, "fit result", ErrorKind::data);
  check_keys(j, {"beta_hat", "log_lik", "converged", "iterations", "gradient_norm", "warnings"},
             "fit result", ErrorKind::data);
  for (const char* k : {"beta_hat", "log_lik", "converged", "iterations", "gradient_norm"})
    if (!j.contains(k)) fail_data(std::string("fit result: missing '") + k + "'");
  FitResult fit;
  fit.beta_hat = j["beta_hat"].get<std::vector<double>>();
  fit.log_lik = j["log_lik"].is_null() ? kNaN : j["log_lik"].get<double>();
  fit.converged = j["converged"].get<bool>();
  fit.iterations = j["iterations"].get<int>();
  fit.gradient_norm = j["gradient_norm"].is_null() ? kNaN : j["gradient_norm"].get<double>();
  if (j.contains("warnings")) fit.warnings = j["warnings"].get<std::vector<std::string>>();
  return fit;
  });
}

const char* sample_data_mode(const RDSSample& sample) {
  for (const Member& m : sample.members)
    if (m.node < 0) return "ingestion";
  return "simulation";
}

namespace {

const char* status_name(EstimateStatus s) {
  switch (s) {
    case EstimateStatus::ok: return "ok";
    case EstimateStatus::degenerate_limit: return "degenerate_limit";
    case EstimateStatus::undefined: return "undefined";
  }
  return "?";
}

}  // namespace

std::string estimate_report_to_json(const EstimateReport& report) {
  json j;
  j["estimator"] = report.estimator;
  if (report.value.defined())
    j["estimate"] = *report.value.value;
  else
    j["estimate"] = nullptr;
  j["status"] = status_name(report.value.status);
  j["note"] = report.value.note;
  j["weight_source"] = report.weight_source;
  j["data_mode"] = report.data_mode;
  return j.dump(2) + "\n";
}

std::string bootstrap_report_to_json(const BootstrapResult& result, const std::string& estimator,
                                     double alpha) {
  json j;
  j["estimator"] = estimator;
  j["method"] = bootstrap_method_name(result.method);
  j["replicates"] = result.B;
  j["point"] = result.point.defined() ? json(*result.point.value) : json(nullptr);
  if (!result.point.note.empty()) j["note"] = result.point.note;
  j["se"] = result.ci.se;
  j["ci"] = {{"alpha", alpha},
             {"lower", result.ci.lo},
             {"upper", result.ci.hi},
             {"clamped", result.ci.clamped}};
  j["replicates_used"] = result.ci.used;
  j["replicates_undefined"] = result.ci.dropped;
  j["restarts"] = result.restarts;
  j["refit_failures"] = result.refit_failures;
  return j.dump(2) + "\n";
}

std::string scenario_config_to_json(const ScenarioConfig& config) {
  json j;
  j["homophily"] = level_name(config.homophily);
  j["mdr"] = level_name(config.mdr);
  j["networks"] = config.networks;
  j["samples_per_network"] = config.samples_per_network;
  j["population_n"] = config.population_n;
  j["design"] = {{"n_target", config.design.n_target},
                 {"n_seeds", config.design.n_seeds},
                 {"coupons", config.design.coupons}};
  json est = json::array();
  for (EstimatorKind k : config.estimators) est.push_back(estimator_name(k));
  j["estimators"] = std::move(est);
  j["bootstrap"] = {{"replicates", config.bootstrap.replicates}, {"alpha", config.bootstrap.alpha}};
  j["with_ci"] = config.with_ci;
  j["root_seed"] = config.root_seed;
  j["threads"] = config.threads;
  return j.dump(2) + "\n";
}

ScenarioConfig scenario_config_from_json(const std::string& text) {
  return guard_json("scenario config", ErrorKind::config, [&] {
  const json j = parse_json(text, "scenario config", ErrorKind::config);
  check_keys(j,
             {"homophily", "mdr", "networks", "samples_per_network", "population_n", "design",
              "estimators", "bootstrap", "with_ci", "root_seed", "threads"},
             "scenario config", ErrorKind::config);
  ScenarioConfig c;
  auto level_field = [&](const char* key, Level fallback) {
    if (!j.contains(key)) return fallback;
    const std::string name = j[key].get<std::string>();
    const auto lv = parse_level(name);
    if (!lv) fail_config(std::string("scenario config: unknown level '") + name + "'");
    return *lv;
  };
  c.homophily = level_field("homophily", c.homophily);
  c.mdr = level_field("mdr", c.mdr);
  if (j.contains("networks")) c.networks = j["networks"].get<int>();
  if (j.contains("samples_per_network"))
    c.samples_per_network = j["samples_per_network"].get<int>();
  if (j.contains("population_n")) c.population_n = j["population_n"].get<std::size_t>();
  if (j.contains("design")) {
    check_keys(j["design"], {"n_target", "n_seeds", "coupons"}, "scenario config design",
               ErrorKind::config);
    if (j["design"].contains("n_target")) c.design.n_target = j["design"]["n_target"].get<int>();
    if (j["design"].contains("n_seeds")) c.design.n_seeds = j["design"]["n_seeds"].get<int>();
    if (j["design"].contains("coupons")) c.design.coupons = j["design"]["coupons"].get<int>();
  }
  if (j.contains("estimators")) {
    for (const json& name : j["estimators"]) {
      const auto kind = parse_estimator(name.get<std::string>());
      if (!kind)
        fail_config("scenario config: unknown estimator '" + name.get<std::string>() + "'");
      c.estimators.push_back(*kind);
    }
  }
  if (j.contains("bootstrap")) {
    check_keys(j["bootstrap"], {"replicates", "alpha"}, "scenario config bootstrap",
               ErrorKind::config);
    if (j["bootstrap"].contains("replicates"))
      c.bootstrap.replicates = j["bootstrap"]["replicates"].get<int>();
    if (j["bootstrap"].contains("alpha")) c.bootstrap.alpha = j["bootstrap"]["alpha"].get<double>();
  }
  if (j.contains("with_ci")) c.with_ci = j["with_ci"].get<bool>();
  if (j.contains("root_seed")) c.root_seed = j["root_seed"].get<std::uint64_t>();
  if (j.contains("threads")) c.threads = j["threads"].get<int>();
  return c;
  });
}

std::string scenario_result_to_json(const ScenarioResult& result) {
  json j;
  j["homophily"] = level_name(result.homophily);
  j["mdr"] = level_name(result.mdr);
  j["networks"] = result.networks;
  j["samples_per_network"] = result.samples_per_network;
  json est = json::array();
  for (EstimatorKind k : result.estimators) est.push_back(estimator_name(k));
  j["estimators"] = std::move(est);
  j["true_mu"] = result.true_mu;
  j["unit_network"] = result.unit_network;
  j["estimates"] = result.estimates;
  j["ci_lower"] = result.ci_lo;
  j["ci_upper"] = result.ci_hi;
  json stats = json::array();
  for (const EstimatorCellStats& st : result.stats) {
    stats.push_back({{"estimator", estimator_name(st.kind)},
                     {"bias", st.bias},
                     {"sd", st.sd},
                     {"rmse", st.rmse},
                     {"coverage", st.coverage},
                     {"defined", st.defined},
                     {"undefined", st.undefined},
                     {"ci_count", st.ci_count}});
  }
  j["stats"] = std::move(stats);
  j["failed_units"] = result.failed_units;
  j["failures"] = result.failures;
  return j.dump(2) + "\n";
}

std::string scenario_table_csv(std::span<const ScenarioResult> results, ScenarioMetric metric) {
  std::string out = "scenario";
  if (!results.empty())
    for (const EstimatorCellStats& st : results.front().stats)
      out += std::string(",") + estimator_name(st.kind);
  out += '\n';
  for (const ScenarioResult& r : results) {
    out += std::string("(") + level_name(r.homophily) + "," + level_name(r.mdr) + ")";
    for (const EstimatorCellStats& st : r.stats) {
      double v = kNaN;
      switch (metric) {
        case ScenarioMetric::bias: v = st.bias; break;
        case ScenarioMetric::sd: v = st.sd; break;
        case ScenarioMetric::rmse: v = st.rmse; break;
        case ScenarioMetric::coverage: v = st.coverage; break;
      }
      if (std::isnan(v)) {
        out += ",";
      } else {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", v);
        out += std::string(",") + buf;
      }
    }
    out += '\n';
  }
  return out;
}

std::string repair_audit_to_json(const RepairAudit& audit) {
  json j;
  j["members"] = audit.members;
  j["imputed_gender"] = audit.imputed_gender;
  j["raised_to_activity"] = audit.raised_to_activity;
  j["modified"] = audit.modified;
  j["same_gender_prob"] = audit.same_gender_prob;
  j["notes"] = audit.notes;
  return j.dump(2) + "\n";
}

}  // namespace rdsmdr
