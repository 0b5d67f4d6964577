#include <vemfacet/report.hpp>
#include <vemfacet/errors.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <json.hpp>

namespace vemfacet
{

  namespace
  {
    using Tree = boost::property_tree::ptree;
    using json = nlohmann::ordered_json;

    std::string trim(const std::string & s)
    {
      const auto a = s.find_first_not_of(" \t\r\n");
      if (a == std::string::npos) {
        return "";
      }
      const auto b = s.find_last_not_of(" \t\r\n");
      return s.substr(a, b - a + 1);
    }

    std::vector<std::string> split_list(const std::string & s)
    {
      std::vector<std::string> out;
      std::string item;
      std::istringstream in(s);
      while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
          out.push_back(item);
        }
      }
      return out;
    }

    template <typename Int>
    Int parse_integer(const std::string & key, const std::string & text)
    {
      const std::string t = trim(text);
      Int v{};
      const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec != std::errc() || ptr != t.data() + t.size()) {
        throw ValidationError("config key '" + key + "': expected an integer, got '" + text + "'");
      }
      return v;
    }

    double parse_real_key(const std::string & key, const std::string & text)
    {
      try {
        return parse_real(text);
      } catch (const ValidationError &) {
        throw ValidationError("config key '" + key + "': expected a number, got '" + text + "'");
      }
    }

    void read_run(const Tree & section, RunSettings & run)
    {
      for (const auto & [key, node] : section) {
        const std::string v = node.get_value<std::string>();
        if (key == "threads") {
          run.threads = parse_integer<unsigned>("run.threads", v);
        } else if (key == "seed") {
          run.seed = parse_integer<std::uint64_t>("run.seed", v);
        } else if (key == "oracle_level") {
          run.oracle_level = parse_integer<int>("run.oracle_level", v);
        } else if (key == "out") {
          run.out = trim(v);
        } else {
          throw ValidationError("unknown key '" + key + "' in [run]");
        }
      }
    }

    StudyConfig read_study(const std::string & name, const Tree & section, const RunSettings & run)
    {
      StudyConfig c;
      c.name = name;
      if (run.seed) {
        c.seed = *run.seed;
      }
      if (run.oracle_level) {
        c.oracle_level = *run.oracle_level;
      }
      if (run.threads) {
        c.threads = *run.threads;
      }
      bool have_kind = false;
      for (const auto & [key, node] : section) {
        const std::string v = node.get_value<std::string>();
        const std::string where = name + "." + key;
        if (key == "kind") {
          c.kind = parse_study_kind(trim(v));
          have_kind = true;
        } else if (key == "spaces") {
          c.spaces.clear();
          for (const auto & s : split_list(v)) {
            c.spaces.push_back(parse_space(s));
          }
        } else if (key == "family") {
          c.mesh.family = trim(v);
        } else if (key == "h") {
          c.mesh.h.clear();
          for (const auto & s : split_list(v)) {
            c.mesh.h.push_back(parse_real_key(where, s));
          }
        } else if (key == "jitter") {
          c.mesh.jitter = parse_real_key(where, v);
        } else if (key == "mesh_seed") {
          c.mesh.seed = parse_integer<std::uint64_t>(where, v);
        } else if (key == "gamma_min") {
          c.mesh.gamma_min = parse_real_key(where, v);
        } else if (key == "fields") {
          c.fields = split_list(v);
        } else if (key == "oracle_level") {
          c.oracle_level = parse_integer<int>(where, v);
        } else if (key == "seed") {
          c.seed = parse_integer<std::uint64_t>(where, v);
        } else if (key == "samples") {
          c.samples = parse_integer<int>(where, v);
        } else if (key == "random_vectors") {
          c.random_vectors = parse_integer<int>(where, v);
        } else if (key == "admissibility") {
          c.admissibility = parse_real_key(where, v);
        } else {
          throw ValidationError("unknown key '" + key + "' in [" + name + "]");
        }
      }
      if (!have_kind) {
        throw ValidationError("study [" + name + "] has no kind");
      }
      family_dimension(c.mesh.family);
      return c;
    }

    json table_json(const StudyTable & t)
    {
      json rows = json::array();
      for (const auto & r : t.rows) {
        rows.push_back({{"h", r.h}, {"quantity", r.quantity}, {"value", r.value}, {"accuracy_estimate", r.accuracy}});
      }
      return {{"name", t.name}, {"rows", rows}};
    }

    json study_json(const StudyReport & r)
    {
      const auto & c = r.config;
      json spaces = json::array();
      for (auto s : c.spaces) {
        spaces.push_back(to_string(s));
      }
      json config = {{"name", c.name},
                     {"kind", to_string(c.kind)},
                     {"spaces", spaces},
                     {"family", c.mesh.family},
                     {"h", c.mesh.h},
                     {"jitter", c.mesh.jitter},
                     {"mesh_seed", c.mesh.seed},
                     {"gamma_min", c.mesh.gamma_min},
                     {"fields", c.fields},
                     {"oracle_level", c.oracle_level},
                     {"seed", c.seed},
                     {"samples", c.samples},
                     {"random_vectors", c.random_vectors},
                     {"admissibility", c.admissibility},
                     {"echo", format_study(c)}};
      json meshes = json::array();
      for (const auto & m : r.meshes) {
        meshes.push_back({{"h", m.h}, {"h_max", m.h_max}, {"cells", m.cells}, {"min_gamma", m.min_gamma}});
      }
      json tables = json::array();
      for (const auto & t : r.tables) {
        tables.push_back(table_json(t));
      }
      json slopes = json::array();
      for (const auto & s : r.slopes) {
        slopes.push_back({{"table", s.table},
                          {"quantity", s.quantity},
                          {"slope", s.slope},
                          {"residual", s.residual},
                          {"points", s.points},
                          {"admissible", s.admissible},
                          {"conclusive", s.conclusive},
                          {"slope_all_points", s.slope_all}});
      }
      json summary = json::object();
      for (const auto & [k, v] : r.summary) {
        summary[k] = v;
      }
      return {{"config", config}, {"meshes", meshes}, {"tables", tables}, {"slopes", slopes}, {"summary", summary}};
    }

    std::string xml_escape(const std::string & s)
    {
      std::string out;
      for (char ch : s) {
        switch (ch) {
        case '<':
          out += "&lt;";
          break;
        case '>':
          out += "&gt;";
          break;
        case '&':
          out += "&amp;";
          break;
        default:
          out += ch;
        }
      }
      return out;
    }
  } // namespace

  double parse_real(const std::string & text)
  {
    const std::string t = trim(text);
    auto number = [&t](const std::string & s) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw ValidationError("not a number: '" + t + "'");
      }
      return v;
    };
    const auto slash = t.find('/');
    if (slash == std::string::npos) {
      return number(t);
    }
    const double den = number(trim(t.substr(slash + 1)));
    if (den == 0.0) {
      throw ValidationError("zero denominator in '" + t + "'");
    }
    return number(trim(t.substr(0, slash))) / den;
  }

  std::string format_real(double x)
  {
    if (std::isnan(x)) {
      return "nan";
    }
    if (std::isinf(x)) {
      return x > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
  }

  StudyFile parse_study_file(const std::string & text)
  {
    Tree tree;
    std::istringstream in(text);
    try {
      boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error & e) {
      throw ParseError("config line " + std::to_string(e.line()) + ": " + e.message());
    }
    StudyFile file;
    for (const auto & [name, section] : tree) {
      if (section.empty() && !section.data().empty()) {
        throw ParseError("config key '" + name + "' outside of a section");
      }
    }
    if (const auto run = tree.get_child_optional("run")) {
      read_run(*run, file.run);
    }
    for (const auto & [name, section] : tree) {
      if (name == "run") {
        continue;
      }
      file.studies.push_back(read_study(name, section, file.run));
      file.studies.back().validate();
    }
    if (file.studies.empty()) {
      throw ValidationError("config defines no studies");
    }
    return file;
  }

  StudyFile load_study_file(const std::string & path)
  {
    std::ifstream in(path);
    if (!in) {
      throw ValidationError("cannot open config file '" + path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_study_file(ss.str());
  }

  std::string format_study(const StudyConfig & c)
  {
    auto join = [](const auto & items, auto fmt) {
      std::string s;
      for (const auto & x : items) {
        s += (s.empty() ? "" : ", ") + fmt(x);
      }
      return s;
    };
    std::ostringstream o;
    o << '[' << c.name << "]\n";
    o << "kind = " << to_string(c.kind) << '\n';
    o << "spaces = " << join(c.spaces, [](SpaceTag s) { return to_string(s); }) << '\n';
    o << "family = " << c.mesh.family << '\n';
    o << "h = " << join(c.mesh.h, [](double h) { return format_real(h); }) << '\n';
    o << "jitter = " << format_real(c.mesh.jitter) << '\n';
    o << "mesh_seed = " << c.mesh.seed << '\n';
    o << "gamma_min = " << format_real(c.mesh.gamma_min) << '\n';
    if (!c.fields.empty()) {
      o << "fields = " << join(c.fields, [](const std::string & f) { return f; }) << '\n';
    }
    o << "oracle_level = " << c.oracle_level << '\n';
    o << "seed = " << c.seed << '\n';
    o << "samples = " << c.samples << '\n';
    o << "random_vectors = " << c.random_vectors << '\n';
    o << "admissibility = " << format_real(c.admissibility) << '\n';
    return o.str();
  }

  std::string report_json(const std::vector<StudyReport> & reports)
  {
    json studies = json::array();
    for (const auto & r : reports) {
      studies.push_back(study_json(r));
    }
    const json root = {{"tool", "vemfacet"}, {"version", tool_version}, {"studies", studies}};
    return root.dump(2) + "\n";
  }

  std::string table_csv(const StudyTable & table)
  {
    std::string out = "h,quantity,value,accuracy_estimate\n";
    for (const auto & r : table.rows) {
      out += format_real(r.h) + "," + r.quantity + "," + format_real(r.value) + "," + format_real(r.accuracy) + "\n";
    }
    return out;
  }

  std::string table_svg(const StudyTable & table, const std::string & title)
  {
    constexpr double W = 640, H = 440, L = 70, R = 190, T = 40, B = 50;
    std::vector<std::string> quantities;
    double hmin = std::numeric_limits<double>::infinity(), hmax = 0.0;
    double vmin = hmin, vmax = 0.0;
    for (const auto & r : table.rows) {
      if (!(r.value > 0.0) || !std::isfinite(r.value)) {
        continue; // not representable on a log axis
      }
      if (std::find(quantities.begin(), quantities.end(), r.quantity) == quantities.end()) {
        quantities.push_back(r.quantity);
      }
      hmin = std::min(hmin, r.h);
      hmax = std::max(hmax, r.h);
      vmin = std::min(vmin, r.value);
      vmax = std::max(vmax, r.value);
    }
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
      << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title)
      << "</text>\n";
    if (quantities.empty()) {
      o << "<text x=\"" << W / 2 << "\" y=\"" << H / 2 << "\" text-anchor=\"middle\">no positive values</text>\n</svg>\n";
      return o.str();
    }
    // decade-aligned log ranges
    const double x0 = std::floor(std::log10(hmin) * 4) / 4 - 0.05, x1 = std::ceil(std::log10(hmax) * 4) / 4 + 0.05;
    double y0 = std::floor(std::log10(vmin)), y1 = std::ceil(std::log10(vmax));
    if (y1 - y0 < 1) {
      y1 = y0 + 1;
    }
    auto px = [&](double h) { return L + (std::log10(h) - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double v) { return H - B - (std::log10(v) - y0) / (y1 - y0) * (H - T - B); };
    o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    const int step = std::max(1, int(std::ceil((y1 - y0) / 8)));
    for (int e = int(y0); e <= int(y1); e += step) {
      const double y = py(std::pow(10.0, e));
      o << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << y << "\" y2=\"" << y
        << "\" stroke=\"#ddd\"/>\n<text x=\"" << L - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">1e" << e
        << "</text>\n";
    }
    std::set<double> hs;
    for (const auto & r : table.rows) {
      hs.insert(r.h);
    }
    for (double h : hs) {
      const double x = px(h);
      o << "<line x1=\"" << x << "\" x2=\"" << x << "\" y1=\"" << T << "\" y2=\"" << H - B
        << "\" stroke=\"#eee\"/>\n<text x=\"" << x << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
        << format_real(h) << "</text>\n";
    }
    o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">h</text>\n";
    static const char * colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    for (std::size_t q = 0; q < quantities.size(); ++q) {
      const char * col = colors[q % 8];
      std::string path;
      for (const auto & r : table.rows) {
        if (r.quantity == quantities[q] && r.value > 0.0 && std::isfinite(r.value)) {
          path += (path.empty() ? "M" : " L") + format_real(px(r.h)) + "," + format_real(py(r.value));
          o << "<circle cx=\"" << px(r.h) << "\" cy=\"" << py(r.value) << "\" r=\"3\" fill=\"" << col << "\"/>\n";
        }
      }
      o << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << col << "\"/>\n";
      const double ly = T + 14 + 18 * q;
      o << "<line x1=\"" << W - R + 10 << "\" x2=\"" << W - R + 30 << "\" y1=\"" << ly - 4 << "\" y2=\"" << ly - 4
        << "\" stroke=\"" << col << "\"/>\n<text x=\"" << W - R + 36 << "\" y=\"" << ly << "\">"
        << xml_escape(quantities[q]) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
  }

} // namespace vemfacet
