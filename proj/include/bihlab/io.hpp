#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "complex_builder.hpp"
#include "diff_ops.hpp"
#include "domain_grid.hpp"
#include "error.hpp"
#include "identity_suite.hpp"
#include "linalg.hpp"

namespace bihlab {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------------------------------------------
// Field files: one JSON header line, then little-endian float64 values (x fastest, component slowest).

inline void save_field(const std::string& path, const Field& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write field file " + path);
  Json hdr;
  hdr["magic"] = "bihfield";
  hdr["rank"] = rank_name(f.rank);
  hdr["dims"] = {f.grid.dims[0], f.grid.dims[1], f.grid.dims[2]};
  hdr["h"] = f.grid.h;
  hdr["count"] = f.values.size();
  out << hdr.dump() << '\n';
  for (Eigen::Index i = 0; i < f.values.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(f.values[i]);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char buf[8];
    std::memcpy(buf, &bits, 8);
    out.write(buf, 8);
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

/// Loads a field; if `expected` is given, a different rank in the header raises HeaderMismatch.
inline Field load_field(const std::string& path, std::optional<Rank> expected = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open field file " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::IoError, "missing header in " + path);
  Json hdr;
  try {
    hdr = Json::parse(line);
  } catch (const std::exception&) {
    throw Error(ErrorCode::HeaderMismatch, "header of " + path + " is not JSON");
  }
  if (!hdr.is_object() || hdr.value("magic", "") != "bihfield")
    throw Error(ErrorCode::HeaderMismatch, "bad magic in " + path);
  Field f;
  try {
    f.rank = rank_from_name(hdr.at("rank").get<std::string>());
    const auto d = hdr.at("dims");
    f.grid = GridSpec{{d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()}, hdr.at("h").get<double>()};
  } catch (const Error&) {
    throw Error(ErrorCode::HeaderMismatch, "bad rank in header of " + path);
  } catch (const std::exception&) {
    throw Error(ErrorCode::HeaderMismatch, "incomplete header in " + path);
  }
  if (expected && *expected != f.rank)
    throw Error(ErrorCode::HeaderMismatch, std::string("expected a ") + rank_name(*expected) + " field, header says " +
                                               rank_name(f.rank));
  const long long count = hdr.value("count", -1LL);
  const long long want = static_cast<long long>(num_components(f.rank)) * f.grid.num_nodes();
  if (count != want) throw Error(ErrorCode::HeaderMismatch, "count does not match rank and dims in " + path);
  f.values.resize(count);
  for (long long i = 0; i < count; ++i) {
    char buf[8];
    if (!in.read(buf, 8)) throw Error(ErrorCode::IoError, "truncated payload in " + path);
    std::uint64_t bits;
    std::memcpy(&bits, buf, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    f.values[i] = std::bit_cast<double>(bits);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorCode::IoError, "trailing bytes in " + path);
  return f;
}

// ---------------------------------------------------------------------------------------------------------------
// Complex descriptors (INI): [grid] [domain] [partition] [weights] [complex].

struct ComplexDescriptor {
  GridSpec grid;
  ShapeDescriptor shape;
  std::string gamma_t = "none";  // none | all | half_x | half_y | half_z
  std::optional<double> plane;
  std::string weight_kind = "identity";  // identity | scaled | random
  std::uint64_t weight_seed = 1;
  double weight_scale = 2.0;
  double weight_cond = 1e2;
  Which which = Which::First;
  BuildOptions build;
  std::optional<bool> extendable;
};

namespace detail {

inline std::vector<int> parse_ints(const std::string& s, const std::string& key) {
  std::istringstream is(s);
  std::vector<int> v;
  std::string tok;
  while (is >> tok) {
    try {
      std::size_t pos = 0;
      v.push_back(std::stoi(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, "key '" + key + "' expects integers, got '" + s + "'");
    }
  }
  return v;
}

inline Index3 parse_index3(const std::string& s, const std::string& key) {
  const auto v = parse_ints(s, key);
  if (v.size() == 1) return {v[0], v[0], v[0]};
  if (v.size() != 3) throw Error(ErrorCode::ConfigError, "key '" + key + "' expects 1 or 3 integers");
  return {v[0], v[1], v[2]};
}

}  // namespace detail

inline ComplexDescriptor parse_descriptor(std::istream& is, const std::string& base_dir = ".") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::ConfigError, std::string("descriptor: ") + e.what());
  }
  static const std::vector<std::string> sections{"grid", "domain", "partition", "weights", "complex"};
  for (const auto& [name, sub] : tree) {
    if (std::find(sections.begin(), sections.end(), name) == sections.end())
      throw Error(ErrorCode::ConfigError, "unknown descriptor section [" + name + "]");
  }
  auto get = [&](const std::string& key) -> std::optional<std::string> {
    auto v = tree.get_optional<std::string>(pt::ptree::path_type(key, '.'));
    if (v) return *v;
    return std::nullopt;
  };
  auto get_double = [&](const std::string& key) -> std::optional<double> {
    auto s = get(key);
    if (!s) return std::nullopt;
    try {
      std::size_t pos = 0;
      const double d = std::stod(*s, &pos);
      if (pos != s->size()) throw std::invalid_argument(*s);
      return d;
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, "key '" + key + "' expects a number, got '" + *s + "'");
    }
  };

  ComplexDescriptor d;
  const auto dims = get("grid.dims");
  if (!dims) throw Error(ErrorCode::ConfigError, "descriptor needs [grid] dims");
  d.grid.dims = detail::parse_index3(*dims, "dims");
  const int nmax = std::max({d.grid.dims[0], d.grid.dims[1], d.grid.dims[2]});
  d.grid.h = get_double("grid.h").value_or(nmax > 1 ? 1.0 / (nmax - 1) : 1.0);
  d.grid.validate();

  const std::string shape = get("domain.shape").value_or("box");
  if (shape == "box") {
    d.shape = ShapeDescriptor{};
  } else if (shape == "box_minus_box") {
    if (auto c = get("domain.cavity")) {
      const auto k = detail::parse_ints(*c, "cavity");
      if (k.size() != 1) throw Error(ErrorCode::ConfigError, "key 'cavity' expects one integer");
      d.shape = ShapeDescriptor::centered_cavity(d.grid, k[0]);
    } else {
      const auto lo = get("domain.inner_lo"), hi = get("domain.inner_hi");
      if (!lo || !hi) throw Error(ErrorCode::ConfigError, "box_minus_box needs cavity or inner_lo/inner_hi");
      d.shape = ShapeDescriptor::box_minus_box(detail::parse_index3(*lo, "inner_lo"), detail::parse_index3(*hi, "inner_hi"));
    }
  } else if (shape == "mask") {
    const auto p = get("domain.mask");
    if (!p) throw Error(ErrorCode::ConfigError, "shape = mask needs a 'mask' path");
    const std::string path = (!p->empty() && p->front() == '/') ? *p : base_dir + "/" + *p;
    d.shape = ShapeDescriptor::mask_file(path);
  } else {
    throw Error(ErrorCode::ConfigError, "unknown shape '" + shape + "'");
  }

  d.gamma_t = get("partition.gamma_t").value_or("none");
  static const std::vector<std::string> gts{"none", "all", "half_x", "half_y", "half_z"};
  if (std::find(gts.begin(), gts.end(), d.gamma_t) == gts.end())
    throw Error(ErrorCode::ConfigError, "unknown gamma_t '" + d.gamma_t + "'");
  d.plane = get_double("partition.plane");

  d.weight_kind = get("weights.weight_kind").value_or("identity");
  if (d.weight_kind != "identity" && d.weight_kind != "scaled" && d.weight_kind != "random")
    throw Error(ErrorCode::ConfigError, "unknown weight_kind '" + d.weight_kind + "'");
  if (auto s = get("weights.weight_seed")) {
    const auto v = detail::parse_ints(*s, "weight_seed");
    if (v.size() != 1 || v[0] < 0) throw Error(ErrorCode::ConfigError, "weight_seed must be a non-negative integer");
    d.weight_seed = static_cast<std::uint64_t>(v[0]);
  }
  d.weight_scale = get_double("weights.weight_scale").value_or(2.0);
  d.weight_cond = get_double("weights.weight_cond").value_or(1e2);
  if (d.weight_scale <= 0.0 || d.weight_cond < 1.0) throw Error(ErrorCode::ConfigError, "weights must be positive");

  const std::string which = get("complex.which").value_or("first");
  if (which == "first") d.which = Which::First;
  else if (which == "second") d.which = Which::Second;
  else throw Error(ErrorCode::ConfigError, "unknown complex '" + which + "'");
  const std::string model = get("complex.model").value_or(get("complex.widths") ? "band" : "staggered");
  if (model == "staggered") d.build.model = BoundaryModel::Staggered;
  else if (model == "band") d.build.model = BoundaryModel::Band;
  else throw Error(ErrorCode::ConfigError, "unknown model '" + model + "'");
  if (auto w = get("complex.widths")) d.build.widths = detail::parse_ints(*w, "widths");
  if (d.build.model == BoundaryModel::Band && d.build.widths.empty())
    throw Error(ErrorCode::ConfigError, "band model needs widths");
  if (auto e = get("complex.extendable")) {
    if (*e == "true") d.extendable = true;
    else if (*e == "false") d.extendable = false;
    else throw Error(ErrorCode::ConfigError, "extendable must be true or false");
  }
  return d;
}

inline ComplexDescriptor load_descriptor(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open descriptor " + path);
  const auto slash = path.find_last_of('/');
  return parse_descriptor(in, slash == std::string::npos ? "." : path.substr(0, slash));
}

inline FaceSelector descriptor_selector(const ComplexDescriptor& d) {
  if (d.gamma_t == "none") return selectors::all_n();
  if (d.gamma_t == "all") return selectors::all_t();
  const int axis = d.gamma_t == "half_x" ? 0 : d.gamma_t == "half_y" ? 1 : 2;
  if (d.plane) return selectors::half_split(axis, *d.plane);
  return selectors::half_split(d.grid, axis);
}

inline std::pair<Weight, Weight> descriptor_weights(const ComplexDescriptor& d) {
  if (d.weight_kind == "scaled") return {Weight::scaled(6, d.weight_scale), Weight::scaled(8, d.weight_scale)};
  if (d.weight_kind == "random") {
    const int nn = d.grid.num_nodes();
    return {Weight::random(6, nn, d.weight_seed, d.weight_cond), Weight::random(8, nn, d.weight_seed + 7919, d.weight_cond)};
  }
  return {Weight::identity(6), Weight::identity(8)};
}

/// Everything a descriptor determines: domain, partition and the built complex.
struct DescribedComplex {
  ComplexDescriptor desc;
  VoxelDomain dom;
  BoundaryPartition part;
  HilbertComplex hc;
};

inline DescribedComplex build_from_descriptor(const ComplexDescriptor& d) {
  DescribedComplex out;
  out.desc = d;
  out.dom = build_domain(d.grid, d.shape);
  out.part = partition_boundary(out.dom, descriptor_selector(d));
  const auto [eps, mu] = descriptor_weights(d);
  out.hc = build_complex(d.which, out.dom, out.part, eps, mu, d.build);
  return out;
}

// ---------------------------------------------------------------------------------------------------------------
// Reports.

struct Check {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double tolerance = 0.0;
};

inline Json check_json(const Check& c) {
  return Json{{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"tolerance", c.tolerance}};
}

inline Json checks_json(const std::vector<Check>& cs) {
  Json a = Json::array();
  for (const auto& c : cs) a.push_back(check_json(c));
  return a;
}

/// Finite doubles pass through; infinities and NaN become strings so the document stays valid JSON.
inline Json number_json(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

inline Json identity_report_json(const SuiteReport& rep) {
  Json a = Json::array();
  for (const auto& r : rep.results)
    a.push_back(Json{{"id", r.id}, {"statement", r.statement}, {"residual", number_json(r.residual)}, {"status", r.status}});
  return a;
}

inline std::string spectrum_csv(const Vec& ev) {
  std::ostringstream os;
  os.precision(17);
  os << "index,eigenvalue\n";
  for (Eigen::Index i = 0; i < ev.size(); ++i) os << i << ',' << ev(i) << '\n';
  return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

}  // namespace bihlab
