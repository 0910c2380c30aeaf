#include "symflow/cif.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "symflow/elements.hpp"
#include "symflow/error.hpp"

namespace symflow::cif {
namespace {

struct Token {
  std::string text;
  int line = 0;
  bool quoted = false;
};

struct Lexed {
  std::vector<Token> tokens;
  std::optional<int> comment_sg;
  int comment_sg_line = 0;
};

std::string fail_prefix(std::string_view source, int line) {
  return std::string(source) + ":" + std::to_string(line) + ": ";
}

Lexed lex(std::string_view text, std::string_view source) {
  Lexed out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  bool in_text_field = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line[0] == ';') {
      // Semicolon-delimited text fields carry free text only; one opaque value.
      if (!in_text_field) out.tokens.push_back({"<text>", line_no, true});
      in_text_field = !in_text_field;
      continue;
    }
    if (in_text_field) continue;
    std::size_t i = 0;
    while (i < line.size()) {
      const char c = line[i];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
      } else if (c == '#') {
        const std::string comment = line.substr(i + 1);
        const auto pos = comment.find("space_group:");
        if (pos != std::string::npos) {
          try {
            out.comment_sg = std::stoi(comment.substr(pos + 12));
            out.comment_sg_line = line_no;
          } catch (const std::exception&) {
            throw InputError(fail_prefix(source, line_no) + "malformed space_group comment");
          }
        }
        break;
      } else if (c == '\'' || c == '"') {
        const std::size_t end = line.find(c, i + 1);
        if (end == std::string::npos) {
          throw InputError(fail_prefix(source, line_no) + "unterminated quoted string");
        }
        out.tokens.push_back({line.substr(i + 1, end - i - 1), line_no, true});
        i = end + 1;
      } else {
        std::size_t end = i;
        while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end]))) ++end;
        out.tokens.push_back({line.substr(i, end - i), line_no, false});
        i = end;
      }
    }
  }
  return out;
}

bool is_keyword(const Token& t) {
  if (t.quoted) return false;
  return t.text[0] == '_' || t.text == "loop_" || t.text.rfind("data_", 0) == 0 ||
         t.text.rfind("save_", 0) == 0 || t.text == "global_" || t.text == "stop_";
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

double parse_number(const Token& tok, std::string_view source) {
  std::string s = tok.text;
  const auto paren = s.find('(');
  if (paren != std::string::npos) s = s.substr(0, paren);
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw InputError(fail_prefix(source, tok.line) + "malformed number '" + tok.text + "'");
  }
  return v;
}

std::string element_symbol(const std::string& raw, std::string_view source, int line) {
  std::string sym;
  if (!raw.empty() && std::isalpha(static_cast<unsigned char>(raw[0]))) {
    sym += static_cast<char>(std::toupper(static_cast<unsigned char>(raw[0])));
    if (raw.size() > 1 && std::islower(static_cast<unsigned char>(raw[1]))) sym += raw[1];
  }
  if (!sym.empty() && find_atomic_number(sym)) return sym;
  if (sym.size() == 2 && find_atomic_number(sym.substr(0, 1))) return sym.substr(0, 1);
  throw InputError(fail_prefix(source, line) + "unknown element symbol '" + raw + "'");
}

}  // namespace

Document parse_document(std::string_view text, std::string_view source) {
  const Lexed lexed = lex(text, source);
  const auto& toks = lexed.tokens;
  Document doc;
  std::map<std::string, Token> items;
  bool have_sites = false;

  std::size_t i = 0;
  while (i < toks.size()) {
    const Token& t = toks[i];
    if (!t.quoted && t.text.rfind("data_", 0) == 0) {
      if (doc.name.empty()) doc.name = t.text.substr(5);
      ++i;
    } else if (!t.quoted && t.text == "loop_") {
      ++i;
      std::vector<std::string> tags;
      while (i < toks.size() && !toks[i].quoted && toks[i].text[0] == '_') {
        tags.push_back(lower(toks[i].text));
        ++i;
      }
      std::vector<Token> values;
      while (i < toks.size() && !is_keyword(toks[i])) values.push_back(toks[i++]);
      if (tags.empty()) throw InputError(fail_prefix(source, t.line) + "loop_ without tags");
      if (values.size() % tags.size() != 0) {
        throw InputError(fail_prefix(source, t.line) + "loop value count is not a multiple of " +
                         std::to_string(tags.size()));
      }
      auto column = [&](const std::string& tag) -> int {
        for (std::size_t c = 0; c < tags.size(); ++c)
          if (tags[c] == tag) return static_cast<int>(c);
        return -1;
      };
      const int cx = column("_atom_site_fract_x");
      if (cx < 0 || have_sites) continue;
      const int cy = column("_atom_site_fract_y"), cz = column("_atom_site_fract_z");
      const int ctype = column("_atom_site_type_symbol"), clabel = column("_atom_site_label");
      if (cy < 0 || cz < 0 || (ctype < 0 && clabel < 0)) {
        throw InputError(fail_prefix(source, t.line) +
                         "atom-site loop needs fract_x/y/z and a type symbol or label");
      }
      have_sites = true;
      const std::size_t width = tags.size();
      for (std::size_t row = 0; row < values.size() / width; ++row) {
        const Token* r = &values[row * width];
        AtomSite site;
        site.label = clabel >= 0 ? r[clabel].text : r[ctype].text;
        const Token& type_tok = ctype >= 0 ? r[ctype] : r[clabel];
        site.symbol = element_symbol(type_tok.text, source, type_tok.line);
        site.frac = Vec3(parse_number(r[cx], source), parse_number(r[cy], source),
                         parse_number(r[cz], source));
        doc.sites.push_back(site);
      }
    } else if (!t.quoted && t.text[0] == '_') {
      if (i + 1 >= toks.size() || is_keyword(toks[i + 1])) {
        throw InputError(fail_prefix(source, t.line) + "tag " + t.text + " has no value");
      }
      items[lower(t.text)] = toks[i + 1];
      i += 2;
    } else {
      ++i;
    }
  }

  auto required = [&](const char* tag) {
    auto it = items.find(tag);
    if (it == items.end()) throw InputError(std::string(source) + ": missing tag " + tag);
    return parse_number(it->second, source);
  };
  doc.cell.a = required("_cell_length_a");
  doc.cell.b = required("_cell_length_b");
  doc.cell.c = required("_cell_length_c");
  doc.cell.alpha = required("_cell_angle_alpha");
  doc.cell.beta = required("_cell_angle_beta");
  doc.cell.gamma = required("_cell_angle_gamma");
  if (!have_sites) throw InputError(std::string(source) + ": missing atom-site loop");
  if (doc.sites.empty()) throw InputError(std::string(source) + ": atom-site loop is empty");

  for (const char* tag : {"_space_group_it_number", "_symmetry_int_tables_number"}) {
    auto it = items.find(tag);
    if (it != items.end()) doc.sg = static_cast<int>(parse_number(it->second, source));
  }
  if (lexed.comment_sg) doc.sg = lexed.comment_sg;
  if (doc.sg && (*doc.sg < 1 || *doc.sg > kNumSpaceGroups)) {
    throw InputError(std::string(source) + ": space group number out of range");
  }
  return doc;
}

Structure parse_cif(std::string_view text, std::string_view source) {
  const Document doc = parse_document(text, source);
  Structure s;
  s.name = doc.name;
  s.sg = doc.sg;
  s.crystal.lattice = lattice::lattice_from_parameters(doc.cell);
  for (const auto& site : doc.sites) {
    s.crystal.numbers.push_back(atomic_number(site.symbol));
    s.crystal.frac.push_back(wrap_unit(site.frac));
  }
  return s;
}

Structure read_cif(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_cif(buf.str(), path.string());
}

std::string write_cif(const Crystal& crystal, std::optional<int> sg, std::string_view name) {
  const lattice::CellParameters p = lattice::cell_parameters(crystal.lattice);
  std::ostringstream out;
  char buf[128];
  if (sg) out << "# space_group: " << *sg << "\n";
  out << "data_" << name << "\n";
  const std::pair<const char*, double> cell[] = {
      {"_cell_length_a", p.a},        {"_cell_length_b", p.b},       {"_cell_length_c", p.c},
      {"_cell_angle_alpha", p.alpha}, {"_cell_angle_beta", p.beta}, {"_cell_angle_gamma", p.gamma}};
  for (const auto& [tag, value] : cell) {
    std::snprintf(buf, sizeof buf, "%s %.6f\n", tag, value);
    out << buf;
  }
  out << "_symmetry_space_group_name_H-M 'P 1'\n"
      << "loop_\n_atom_site_label\n_atom_site_type_symbol\n"
      << "_atom_site_fract_x\n_atom_site_fract_y\n_atom_site_fract_z\n";
  for (std::size_t i = 0; i < crystal.size(); ++i) {
    const std::string& sym = element(crystal.numbers[i]).symbol;
    const Vec3 f = wrap_unit(crystal.frac[i]);
    std::snprintf(buf, sizeof buf, "%s%zu %s %.8f %.8f %.8f\n", sym.c_str(), i + 1, sym.c_str(),
                  f[0], f[1], f[2]);
    out << buf;
  }
  return out.str();
}

}  // namespace symflow::cif
