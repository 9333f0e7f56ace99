#include "bmca/source_index.hpp"

#include <algorithm>
#include <cctype>
#include <functional>

#include "bmca/util.hpp"
#include "json.hpp"

namespace bmca::index {

std::vector<std::string> CallGraph::callers_of(const std::string& callee) const {
  std::vector<std::string> out;
  for (const auto& [u, v] : edges)
    if (v == callee) out.push_back(u);
  return out;
}

std::vector<std::string> CallGraph::callees_of(const std::string& caller) const {
  std::vector<std::string> out;
  for (const auto& [u, v] : edges)
    if (u == caller) out.push_back(v);
  return out;
}

// ---------------------------------------------------------------------------
// Extraction helpers

namespace {

bool ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Replaces comments, string and char literals with spaces so structural
// scanning (braces, parens, identifiers) is not confused. Newlines survive.
std::string strip_noise(const std::string& src) {
  std::string out = src;
  size_t i = 0;
  auto blank = [&](size_t from, size_t to) {
    for (size_t k = from; k < to && k < out.size(); ++k)
      if (out[k] != '\n') out[k] = ' ';
  };
  while (i < src.size()) {
    char c = src[i];
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      size_t e = src.find('\n', i);
      if (e == std::string::npos) e = src.size();
      blank(i, e);
      i = e;
    } else if (c == '/' && i + 1 < src.size() && src[i + 1] == '*') {
      size_t e = src.find("*/", i + 2);
      e = e == std::string::npos ? src.size() : e + 2;
      blank(i, e);
      i = e;
    } else if (c == '"') {
      size_t e = i + 1;
      while (e < src.size() && src[e] != '"') {
        if (src[e] == '\\') ++e;
        ++e;
      }
      e = e < src.size() ? e + 1 : src.size();
      blank(i, e);
      i = e;
    } else if (c == '\'') {
      size_t e = i + 1;
      while (e < src.size() && src[e] != '\'' && e - i < 4) {
        if (src[e] == '\\') ++e;
        ++e;
      }
      if (e < src.size() && src[e] == '\'') {
        blank(i, e + 1);
        i = e + 1;
      } else {
        ++i;  // rust lifetime tick, leave as-is
      }
    } else {
      ++i;
    }
  }
  return out;
}

int line_of(const std::string& s, size_t pos) {
  return 1 + static_cast<int>(std::count(s.begin(), s.begin() + pos, '\n'));
}

size_t match_forward(const std::string& s, size_t open_pos, char open, char close) {
  int depth = 0;
  for (size_t i = open_pos; i < s.size(); ++i) {
    if (s[i] == open) ++depth;
    else if (s[i] == close && --depth == 0) return i;
  }
  return std::string::npos;
}

const std::set<std::string> kCKeywords = {
    "if", "else", "for", "while", "do", "switch", "return", "sizeof", "case",
    "goto", "break", "continue", "typedef", "struct", "union", "enum",
    "static", "const", "inline", "void", "int", "char", "long", "short",
    "unsigned", "signed", "float", "double", "defined", "_Alignof"};

const std::set<std::string> kRustKeywords = {
    "if", "else", "match", "while", "for", "loop", "return", "fn", "let",
    "mut", "as", "in", "Some", "None", "Ok", "Err", "Box", "Vec", "String",
    "assert", "panic", "unsafe", "move", "where", "impl"};

std::set<std::string> scan_callees(const std::string& stripped, size_t from,
                                   size_t to, bool rust) {
  std::set<std::string> out;
  const auto& kw = rust ? kRustKeywords : kCKeywords;
  size_t i = from;
  while (i < to) {
    if (!ident_start(stripped[i])) { ++i; continue; }
    size_t s = i;
    while (i < to && ident_char(stripped[i])) ++i;
    std::string name = stripped.substr(s, i - s);
    size_t j = i;
    while (j < to && std::isspace(static_cast<unsigned char>(stripped[j]))) ++j;
    if (j >= to || stripped[j] != '(') continue;
    if (kw.count(name)) continue;
    // skip member/path calls and macro invocations
    size_t p = s;
    while (p > from && std::isspace(static_cast<unsigned char>(stripped[p - 1])))
      --p;
    if (p > from) {
      char prev = stripped[p - 1];
      if (prev == '.' || prev == ':' || prev == '!') continue;
      if (prev == '>' && p - 1 > from && stripped[p - 2] == '-') continue;
    }
    out.insert(name);
  }
  return out;
}

void parse_c_params(const std::string& text, FunctionRecord& rec) {
  std::vector<std::string> parts;
  int depth = 0;
  std::string cur;
  for (char c : text) {
    if (c == '(' || c == '[') ++depth;
    if (c == ')' || c == ']') --depth;
    if (c == ',' && depth == 0) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  for (auto& p : parts) {
    // trim
    size_t a = p.find_first_not_of(" \t\n\r");
    size_t b = p.find_last_not_of(" \t\n\r");
    if (a == std::string::npos) continue;
    p = p.substr(a, b - a + 1);
    if (p == "void" || p == "..." || p.empty()) continue;
    // last identifier is the parameter name
    size_t e = p.size();
    while (e > 0 && !ident_char(p[e - 1])) --e;
    size_t s = e;
    while (s > 0 && ident_char(p[s - 1])) --s;
    if (e == 0 || s == e || std::isdigit(static_cast<unsigned char>(p[s]))) {
      rec.params.emplace_back("arg" + std::to_string(rec.params.size()), p);
      continue;
    }
    std::string name = p.substr(s, e - s);
    std::string type = p.substr(0, s) + p.substr(e);
    size_t ta = type.find_first_not_of(" \t\n\r");
    size_t tb = type.find_last_not_of(" \t\n\r");
    type = ta == std::string::npos ? "" : type.substr(ta, tb - ta + 1);
    rec.params.emplace_back(name, type);
  }
}

void extract_c(const std::string& src, const std::string& path,
               CodebaseIndex& idx) {
  std::string stripped = strip_noise(src);
  size_t i = 0;
  size_t item_start = 0;  // start of the current top-level item
  int depth = 0;
  while (i < stripped.size()) {
    char c = stripped[i];
    if (c == '#') {  // preprocessor line
      size_t e = stripped.find('\n', i);
      i = e == std::string::npos ? stripped.size() : e + 1;
      item_start = i;
      continue;
    }
    if (c == '{') { ++depth; ++i; continue; }
    if (c == '}') { --depth; ++i; item_start = i; continue; }
    if (c == ';' && depth == 0) { ++i; item_start = i; continue; }
    if (c == '(' && depth == 0) {
      // identifier directly before the paren
      size_t e = i;
      while (e > item_start &&
             std::isspace(static_cast<unsigned char>(stripped[e - 1])))
        --e;
      size_t s = e;
      while (s > item_start && ident_char(stripped[s - 1])) --s;
      if (s == e || !ident_start(stripped[s])) { ++i; continue; }
      std::string name = stripped.substr(s, e - s);
      std::string pre = stripped.substr(item_start, s - item_start);
      size_t close = match_forward(stripped, i, '(', ')');
      if (close == std::string::npos) {
        idx.diagnostics.push_back(path + ": unbalanced parens near '" + name +
                                  "', definition skipped");
        break;
      }
      size_t j = close + 1;
      while (j < stripped.size() &&
             std::isspace(static_cast<unsigned char>(stripped[j])))
        ++j;
      bool has_type = pre.find_first_not_of(" \t\n\r*") != std::string::npos;
      if (j >= stripped.size() || stripped[j] != '{' || kCKeywords.count(name) ||
          !has_type) {
        i = close + 1;
        continue;
      }
      size_t body_end = match_forward(stripped, j, '{', '}');
      if (body_end == std::string::npos) {
        idx.diagnostics.push_back(path + ": unbalanced braces in '" + name +
                                  "', definition skipped");
        break;
      }
      FunctionRecord rec;
      rec.name = name;
      rec.source_language = SourceLanguage::c;
      rec.file_path = path;
      size_t def_start = pre.find_first_not_of(" \t\n\r");
      size_t abs_start = item_start + (def_start == std::string::npos ? 0 : def_start);
      rec.start_line = line_of(stripped, abs_start);
      rec.end_line = line_of(stripped, body_end);
      rec.body_text = src.substr(abs_start, body_end + 1 - abs_start);
      rec.return_type_text = pre;
      {
        size_t a = rec.return_type_text.find_first_not_of(" \t\n\r");
        size_t b = rec.return_type_text.find_last_not_of(" \t\n\r");
        rec.return_type_text =
            a == std::string::npos ? "" : rec.return_type_text.substr(a, b - a + 1);
      }
      rec.is_public = pre.find("static") == std::string::npos;
      if (rec.return_type_text.rfind("static ", 0) == 0)
        rec.return_type_text = rec.return_type_text.substr(7);
      parse_c_params(src.substr(i + 1, close - i - 1), rec);
      rec.callees = scan_callees(stripped, j, body_end, false);
      rec.callees.erase(rec.name);
      if (idx.functions.count(name)) {
        idx.diagnostics.push_back(path + ": duplicate definition of '" + name +
                                  "' ignored");
      } else {
        idx.functions.emplace(name, std::move(rec));
      }
      i = body_end + 1;
      item_start = i;
      continue;
    }
    ++i;
  }
}

void extract_rust(const std::string& src, const std::string& path,
                  CodebaseIndex& idx) {
  std::string stripped = strip_noise(src);
  size_t i = 0;
  int depth = 0;
  size_t item_start = 0;
  while (i < stripped.size()) {
    char c = stripped[i];
    if (c == '{') { ++depth; ++i; continue; }
    if (c == '}') { --depth; ++i; item_start = i; continue; }
    if (c == ';' && depth == 0) { ++i; item_start = i; continue; }
    if (depth == 0 && ident_start(c)) {
      size_t s = i;
      while (i < stripped.size() && ident_char(stripped[i])) ++i;
      std::string word = stripped.substr(s, i - s);
      if (word != "fn") continue;
      size_t j = i;
      while (j < stripped.size() &&
             std::isspace(static_cast<unsigned char>(stripped[j])))
        ++j;
      size_t ns = j;
      while (j < stripped.size() && ident_char(stripped[j])) ++j;
      std::string name = stripped.substr(ns, j - ns);
      if (name.empty()) continue;
      if (j < stripped.size() && stripped[j] == '<') {
        size_t g = match_forward(stripped, j, '<', '>');
        if (g == std::string::npos) {
          idx.diagnostics.push_back(path + ": unbalanced generics in '" + name +
                                    "', definition skipped");
          break;
        }
        j = g + 1;
      }
      while (j < stripped.size() &&
             std::isspace(static_cast<unsigned char>(stripped[j])))
        ++j;
      if (j >= stripped.size() || stripped[j] != '(') continue;
      size_t close = match_forward(stripped, j, '(', ')');
      if (close == std::string::npos) {
        idx.diagnostics.push_back(path + ": unbalanced parens in '" + name +
                                  "', definition skipped");
        break;
      }
      size_t brace = stripped.find('{', close);
      size_t semi = stripped.find(';', close);
      if (brace == std::string::npos || (semi != std::string::npos && semi < brace)) {
        i = close + 1;
        continue;  // declaration only
      }
      size_t body_end = match_forward(stripped, brace, '{', '}');
      if (body_end == std::string::npos) {
        idx.diagnostics.push_back(path + ": unbalanced braces in '" + name +
                                  "', definition skipped");
        break;
      }
      FunctionRecord rec;
      rec.name = name;
      rec.source_language = SourceLanguage::rust;
      rec.file_path = path;
      std::string pre = stripped.substr(item_start, s - item_start);
      size_t def_start = pre.find_first_not_of(" \t\n\r");
      size_t abs_start = item_start + (def_start == std::string::npos ? 0 : def_start);
      rec.start_line = line_of(stripped, abs_start);
      rec.end_line = line_of(stripped, body_end);
      rec.body_text = src.substr(abs_start, body_end + 1 - abs_start);
      rec.is_public = pre.find("pub") != std::string::npos;
      {  // return type after ')'
        std::string tail = stripped.substr(close + 1, brace - close - 1);
        size_t arrow = tail.find("->");
        if (arrow != std::string::npos) {
          std::string rt = tail.substr(arrow + 2);
          size_t a = rt.find_first_not_of(" \t\n\r");
          size_t b = rt.find_last_not_of(" \t\n\r");
          rec.return_type_text = a == std::string::npos ? "" : rt.substr(a, b - a + 1);
        }
      }
      {  // params: name: Type, top-level commas
        std::string ptext = src.substr(j + 1, close - j - 1);
        std::vector<std::string> parts;
        int d = 0;
        std::string cur;
        for (char pc : ptext) {
          if (pc == '(' || pc == '[' || pc == '<') ++d;
          if (pc == ')' || pc == ']' || pc == '>') --d;
          if (pc == ',' && d == 0) {
            parts.push_back(cur);
            cur.clear();
          } else {
            cur += pc;
          }
        }
        if (!cur.empty()) parts.push_back(cur);
        for (auto& p : parts) {
          size_t a = p.find_first_not_of(" \t\n\r");
          size_t b = p.find_last_not_of(" \t\n\r");
          if (a == std::string::npos) continue;
          p = p.substr(a, b - a + 1);
          if (p == "self" || p == "&self" || p == "&mut self") continue;
          size_t colon = p.find(':');
          if (colon == std::string::npos) continue;
          std::string pname = p.substr(0, colon);
          std::string ptype = p.substr(colon + 1);
          auto trim = [](std::string& x) {
            size_t xa = x.find_first_not_of(" \t\n\r");
            size_t xb = x.find_last_not_of(" \t\n\r");
            x = xa == std::string::npos ? "" : x.substr(xa, xb - xa + 1);
          };
          trim(pname);
          trim(ptype);
          if (pname.rfind("mut ", 0) == 0) pname = pname.substr(4);
          rec.params.emplace_back(pname, ptype);
        }
      }
      rec.callees = scan_callees(stripped, brace, body_end, true);
      rec.callees.erase(rec.name);
      if (idx.functions.count(name)) {
        idx.diagnostics.push_back(path + ": duplicate definition of '" + name +
                                  "' ignored");
      } else {
        idx.functions.emplace(name, std::move(rec));
      }
      i = body_end + 1;
      item_start = i;
      continue;
    }
    ++i;
  }
}

}  // namespace

void rebuild_graph(CodebaseIndex& idx) {
  CallGraph g;
  idx.externals.clear();
  for (const auto& [name, rec] : idx.functions) g.nodes.insert(name);
  for (const auto& [name, rec] : idx.functions) {
    for (const auto& callee : rec.callees) {
      if (g.nodes.count(callee)) g.edges.emplace_back(name, callee);
      else idx.externals.insert(callee);
    }
  }
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  g.entry_set = g.nodes;
  for (const auto& [u, v] : g.edges) g.entry_set.erase(v);
  idx.graph = std::move(g);
}

IndexResult index_sources(const std::vector<std::string>& paths,
                          std::optional<SourceLanguage> language_filter) {
  IndexResult res;
  for (const auto& path : paths) {
    auto content = read_file(path);
    if (!content) {
      res.error = IndexError{"unreadable path: " + path};
      return res;
    }
    SourceLanguage lang;
    if (path.size() >= 3 && path.substr(path.size() - 3) == ".rs")
      lang = SourceLanguage::rust;
    else if (path.size() >= 2 && (path.substr(path.size() - 2) == ".c" ||
                                  path.substr(path.size() - 2) == ".h"))
      lang = SourceLanguage::c;
    else {
      res.index.diagnostics.push_back(path + ": unsupported extension, skipped");
      continue;
    }
    if (language_filter && lang != *language_filter) continue;
    if (lang == SourceLanguage::c) extract_c(*content, path, res.index);
    else extract_rust(*content, path, res.index);
  }
  rebuild_graph(res.index);
  return res;
}

IndexResult import_call_graph(const std::string& json_text) {
  IndexResult res;
  nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.contains("functions")) {
    res.error = IndexError{"malformed call-graph import"};
    return res;
  }
  for (const auto& f : j["functions"]) {
    FunctionRecord rec;
    rec.name = f.value("name", "");
    if (rec.name.empty()) continue;
    rec.file_path = f.value("file", "");
    rec.is_public = f.value("public", true);
    rec.source_language =
        rec.file_path.size() >= 3 &&
                rec.file_path.substr(rec.file_path.size() - 3) == ".rs"
            ? SourceLanguage::rust
            : SourceLanguage::c;
    if (f.contains("callees"))
      for (const auto& c : f["callees"]) rec.callees.insert(c.get<std::string>());
    res.index.functions.emplace(rec.name, std::move(rec));
  }
  rebuild_graph(res.index);
  return res;
}

std::optional<std::set<std::string>> load_entry_manifest(const std::string& path) {
  auto content = read_file(path);
  if (!content) return std::nullopt;
  nlohmann::json j = nlohmann::json::parse(*content, nullptr, false);
  if (j.is_discarded() || !j.is_array()) return std::nullopt;
  std::set<std::string> out;
  for (const auto& e : j) out.insert(e.get<std::string>());
  return out;
}

DomainSummary build_domain_summary(const CodebaseIndex& idx,
                                   const std::optional<std::string>& external,
                                   size_t char_budget) {
  DomainSummary s;
  std::set<std::string> types;
  for (const auto& [name, rec] : idx.functions) {
    std::string sig = name + "(";
    for (size_t i = 0; i < rec.params.size(); ++i) {
      if (i) sig += ", ";
      sig += rec.params[i].second;
      types.insert(rec.params[i].second);
    }
    sig += ")";
    if (!rec.return_type_text.empty()) {
      sig += " -> " + rec.return_type_text;
      types.insert(rec.return_type_text);
    }
    sig += rec.is_public ? " [public]" : " [private]";
    sig += rec.source_language == SourceLanguage::rust ? " [rust]" : " [c]";
    s.signature_digest += sig + "\n";
  }
  for (const auto& t : types) s.type_digest += t + "\n";
  if (external) s.external_notes = fnv1a_hex(*external);

  std::string ext_part =
      s.external_notes ? "external-notes-digest: " + *s.external_notes + "\n" : "";
  std::string fixed = "signatures:\n" + s.signature_digest + ext_part;
  std::string types_part = "types:\n" + s.type_digest;
  // the type digest is truncated first when over budget
  if (fixed.size() + types_part.size() > char_budget) {
    size_t room = fixed.size() < char_budget ? char_budget - fixed.size() : 0;
    types_part = types_part.substr(0, room);
  }
  s.text = fixed + types_part;
  if (s.text.size() > char_budget) s.text = s.text.substr(0, char_budget);
  return s;
}

// ---------------------------------------------------------------------------
// Kosaraju condensation and layering

SccDag condense_sccs(const CallGraph& graph) {
  std::vector<std::string> nodes(graph.nodes.begin(), graph.nodes.end());
  std::map<std::string, std::vector<std::string>> fwd, rev;
  for (const auto& n : nodes) {
    fwd[n];
    rev[n];
  }
  for (const auto& [u, v] : graph.edges) {
    fwd[u].push_back(v);
    rev[v].push_back(u);
  }

  std::vector<std::string> order;
  std::set<std::string> visited;
  std::function<void(const std::string&)> dfs1 = [&](const std::string& n) {
    visited.insert(n);
    for (const auto& m : fwd[n])
      if (!visited.count(m)) dfs1(m);
    order.push_back(n);
  };
  for (const auto& n : nodes)
    if (!visited.count(n)) dfs1(n);

  SccDag dag;
  std::map<std::string, int> comp_of;
  std::function<void(const std::string&, int)> dfs2 = [&](const std::string& n,
                                                          int c) {
    comp_of[n] = c;
    dag.components[c].push_back(n);
    for (const auto& m : rev[n])
      if (!comp_of.count(m)) dfs2(m, c);
  };
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (comp_of.count(*it)) continue;
    dag.components.emplace_back();
    dfs2(*it, static_cast<int>(dag.components.size()) - 1);
  }
  for (auto& comp : dag.components) std::sort(comp.begin(), comp.end());

  std::set<std::pair<int, int>> cedges;
  for (const auto& [u, v] : graph.edges) {
    int cu = comp_of[u], cv = comp_of[v];
    if (cu != cv) cedges.insert({cu, cv});
  }
  dag.component_edges.assign(cedges.begin(), cedges.end());

  int n = static_cast<int>(dag.components.size());
  std::vector<std::vector<int>> out_edges(n), in_edges(n);
  for (const auto& [u, v] : dag.component_edges) {
    out_edges[u].push_back(v);
    in_edges[v].push_back(u);
  }
  // longest-path depth from leaves (bottomup) and from roots (topdown)
  std::vector<int> depth_bu(n, -1), depth_td(n, -1);
  std::function<int(int)> bu = [&](int c) -> int {
    if (depth_bu[c] >= 0) return depth_bu[c];
    int d = 0;
    for (int m : out_edges[c]) d = std::max(d, bu(m) + 1);
    return depth_bu[c] = d;
  };
  std::function<int(int)> td = [&](int c) -> int {
    if (depth_td[c] >= 0) return depth_td[c];
    int d = 0;
    for (int m : in_edges[c]) d = std::max(d, td(m) + 1);
    return depth_td[c] = d;
  };
  int max_bu = 0, max_td = 0;
  for (int c = 0; c < n; ++c) {
    max_bu = std::max(max_bu, bu(c));
    max_td = std::max(max_td, td(c));
  }
  dag.layers_bottomup.assign(n ? max_bu + 1 : 0, {});
  dag.layers_topdown.assign(n ? max_td + 1 : 0, {});
  for (int c = 0; c < n; ++c) {
    dag.layers_bottomup[depth_bu[c]].push_back(c);
    dag.layers_topdown[depth_td[c]].push_back(c);
  }
  return dag;
}

std::vector<std::vector<std::string>> layer_schedule(const SccDag& dag,
                                                     Direction direction) {
  const auto& layers = direction == Direction::bottomup ? dag.layers_bottomup
                                                        : dag.layers_topdown;
  std::vector<std::vector<std::string>> out;
  for (const auto& layer : layers) {
    std::vector<std::string> names;
    for (int c : layer)
      names.insert(names.end(), dag.components[c].begin(),
                   dag.components[c].end());
    std::sort(names.begin(), names.end());
    out.push_back(std::move(names));
  }
  return out;
}

std::optional<std::set<std::string>> transitive_callee_closure(
    const CodebaseIndex& idx, const std::string& root) {
  if (!idx.functions.count(root)) return std::nullopt;
  std::set<std::string> closure{root};
  std::vector<std::string> work{root};
  while (!work.empty()) {
    std::string cur = work.back();
    work.pop_back();
    auto it = idx.functions.find(cur);
    if (it == idx.functions.end()) continue;
    for (const auto& callee : it->second.callees) {
      if (!idx.functions.count(callee)) continue;
      if (closure.insert(callee).second) work.push_back(callee);
    }
  }
  return closure;
}

}  // namespace bmca::index
