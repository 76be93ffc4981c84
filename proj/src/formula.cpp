#include "tailkit/formula.hpp"

#include <cctype>
#include <cstdlib>
#include <sstream>

namespace tailkit {

static std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

static std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

static bool valid_identifier(const std::string& s) {
  if (s.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
  for (char ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_') return false;
  return true;
}

// Extracts the argument list of `name(...)`, or empty if token is not that call.
static bool match_call(const std::string& token, const std::string& name, std::string* args) {
  if (token.size() < name.size() + 2) return false;
  if (token.compare(0, name.size(), name) != 0) return false;
  std::string rest = trim(token.substr(name.size()));
  if (rest.empty() || rest.front() != '(' || rest.back() != ')') return false;
  *args = trim(rest.substr(1, rest.size() - 2));
  return true;
}

static FormulaTerm parse_term(const std::string& raw) {
  const std::string token = trim(raw);
  if (token == "1") return intercept_term();
  std::string args;
  if (match_call(token, "lin", &args)) {
    if (!valid_identifier(args)) throw SchemaError("formula: bad lin() argument '" + args + "'");
    return linear_term(args);
  }
  if (match_call(token, "ind", &args)) {
    const auto pos = args.find("==");
    if (pos == std::string::npos)
      throw SchemaError("formula: ind() needs VAR==LEVEL, got '" + args + "'");
    const std::string var = trim(args.substr(0, pos));
    const std::string lvl = trim(args.substr(pos + 2));
    if (!valid_identifier(var)) throw SchemaError("formula: bad ind() variable '" + var + "'");
    char* end = nullptr;
    const double level = std::strtod(lvl.c_str(), &end);
    if (end == lvl.c_str() || *end != '\0')
      throw SchemaError("formula: ind() level must be numeric, got '" + lvl + "'");
    return indicator_term(var, level);
  }
  if (match_call(token, "crs", &args)) {
    const auto parts = split(args, ',');
    if (parts.size() != 2) throw SchemaError("formula: crs() needs VAR, B=INT, got '" + args + "'");
    const std::string var = trim(parts[0]);
    std::string bspec = trim(parts[1]);
    if (!valid_identifier(var)) throw SchemaError("formula: bad crs() variable '" + var + "'");
    if (bspec.compare(0, 2, "B=") != 0)
      throw SchemaError("formula: crs() second argument must be B=INT, got '" + bspec + "'");
    const std::string bval = trim(bspec.substr(2));
    char* end = nullptr;
    const long b = std::strtol(bval.c_str(), &end, 10);
    if (end == bval.c_str() || *end != '\0' || b < 3)
      throw SchemaError("formula: crs() basis size must be an integer >= 3, got '" + bval + "'");
    return spline_term(var, static_cast<int>(b));
  }
  throw SchemaError("formula: cannot parse term '" + token + "'");
}

Formula Formula::parse(const std::string& text) {
  const auto tilde = text.find('~');
  if (tilde == std::string::npos) throw SchemaError("formula: missing '~' in '" + text + "'");
  Formula f;
  f.target = trim(text.substr(0, tilde));
  if (!valid_identifier(f.target))
    throw SchemaError("formula: bad target name '" + f.target + "'");
  const std::string rhs = trim(text.substr(tilde + 1));
  if (rhs.empty()) throw SchemaError("formula: empty right-hand side in '" + text + "'");
  for (const auto& tok : split(rhs, '+')) f.terms.push_back(parse_term(tok));
  return f;
}

std::string FormulaTerm::str() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::intercept: os << "1"; break;
    case Kind::linear: os << "lin(" << var << ")"; break;
    case Kind::indicator:
      os << "ind(" << var << "==";
      if (level == static_cast<long long>(level))
        os << static_cast<long long>(level);
      else
        os << level;
      os << ")";
      break;
    case Kind::spline: os << "crs(" << var << ", B=" << basis_dim << ")"; break;
  }
  return os.str();
}

std::string Formula::str() const {
  std::ostringstream os;
  os << target << " ~ ";
  for (std::size_t i = 0; i < terms.size(); ++i) os << (i ? " + " : "") << terms[i].str();
  return os.str();
}

std::vector<std::string> Formula::variables() const {
  std::vector<std::string> out;
  for (const auto& t : terms) {
    if (t.var.empty()) continue;
    bool seen = false;
    for (const auto& v : out)
      if (v == t.var) seen = true;
    if (!seen) out.push_back(t.var);
  }
  return out;
}

bool Formula::has_intercept() const {
  for (const auto& t : terms)
    if (t.kind == FormulaTerm::Kind::intercept) return true;
  return false;
}

}  // namespace tailkit
