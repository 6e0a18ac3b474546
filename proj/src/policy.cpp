#include "medledger/policy.hpp"

#include <algorithm>
#include <charconv>

namespace medledger::policy {

namespace {

bool attr_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
         c == '.' || c == ':' || c == '-';
}

// Keywords are reserved whole words; anything else made of attribute
// characters is an attribute, so "org:hospitalA" is a single leaf.
bool is_keyword(std::string_view w) { return w == "AND" || w == "OR" || w == "ANY" || w == "OF"; }

struct Token {
  enum class Kind { Word, Keyword, LParen, RParen, Comma, End } kind;
  std::string_view text;
  std::size_t offset;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) { advance(); }

  PolicyFormula parse() {
    PolicyFormula f{parse_or()};
    if (tok_.kind != Token::Kind::End) syntax("unexpected token '" + std::string(tok_.text) + "'");
    if (depth(f.root) > kMaxDepth)
      throw PolicyError(PolicyError::Kind::TooComplex, 0, "policy nesting exceeds 16");
    if (leaf_count(f.root) > kMaxLeaves)
      throw PolicyError(PolicyError::Kind::TooComplex, 0, "policy has more than 256 leaves");
    return f;
  }

 private:
  [[noreturn]] void syntax(const std::string& msg) const {
    throw PolicyError(PolicyError::Kind::Syntax, tok_.offset, msg);
  }

  void advance() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' ||
                                   text_[pos_] == '\n' || text_[pos_] == '\r'))
      ++pos_;
    if (pos_ >= text_.size()) {
      tok_ = {Token::Kind::End, {}, text_.size()};
      return;
    }
    const std::size_t start = pos_;
    char c = text_[pos_];
    if (c == '(' || c == ')' || c == ',') {
      ++pos_;
      auto kind = c == '(' ? Token::Kind::LParen
                           : (c == ')' ? Token::Kind::RParen : Token::Kind::Comma);
      tok_ = {kind, text_.substr(start, 1), start};
      return;
    }
    if (attr_char(c)) {
      while (pos_ < text_.size() && attr_char(text_[pos_])) ++pos_;
      auto word = text_.substr(start, pos_ - start);
      tok_ = {is_keyword(word) ? Token::Kind::Keyword : Token::Kind::Word, word, start};
      return;
    }
    throw PolicyError(PolicyError::Kind::Syntax, start,
                      std::string("unexpected character '") + c + "'");
  }

  bool at_keyword(std::string_view kw) const {
    return tok_.kind == Token::Kind::Keyword && tok_.text == kw;
  }

  void expect(Token::Kind kind, const char* what) {
    if (tok_.kind != kind) syntax(std::string("expected ") + what);
    advance();
  }

  PolicyNode parse_or() {
    std::vector<PolicyNode> terms;
    terms.push_back(parse_and());
    while (at_keyword("OR")) {
      advance();
      terms.push_back(parse_and());
    }
    if (terms.size() == 1) return std::move(terms.front());
    return PolicyNode::one_of(std::move(terms));
  }

  PolicyNode parse_and() {
    std::vector<PolicyNode> terms;
    terms.push_back(parse_primary());
    while (at_keyword("AND")) {
      advance();
      terms.push_back(parse_primary());
    }
    if (terms.size() == 1) return std::move(terms.front());
    return PolicyNode::all_of(std::move(terms));
  }

  PolicyNode parse_primary() {
    switch (tok_.kind) {
      case Token::Kind::Word: {
        auto node = PolicyNode::attr(std::string(tok_.text));
        advance();
        return node;
      }
      case Token::Kind::LParen: {
        advance();
        auto inner = parse_or();
        expect(Token::Kind::RParen, "')'");
        return inner;
      }
      case Token::Kind::Keyword:
        if (tok_.text == "ANY") return parse_any();
        syntax("unexpected keyword '" + std::string(tok_.text) + "'");
      case Token::Kind::End:
        syntax("unexpected end of policy");
      default:
        syntax("unexpected token '" + std::string(tok_.text) + "'");
    }
  }

  PolicyNode parse_any() {
    advance();  // ANY
    if (tok_.kind != Token::Kind::Word) syntax("expected threshold after ANY");
    const std::size_t k_offset = tok_.offset;
    std::uint32_t k = 0;
    auto [ptr, ec] = std::from_chars(tok_.text.data(), tok_.text.data() + tok_.text.size(), k);
    if (ec != std::errc() || ptr != tok_.text.data() + tok_.text.size())
      syntax("threshold must be a decimal integer");
    advance();
    if (!at_keyword("OF")) syntax("expected OF");
    advance();
    expect(Token::Kind::LParen, "'('");
    std::vector<PolicyNode> children;
    children.push_back(parse_or());
    while (tok_.kind == Token::Kind::Comma) {
      advance();
      children.push_back(parse_or());
    }
    if (children.size() < 2) syntax("ANY needs at least two alternatives");
    expect(Token::Kind::RParen, "')'");
    if (k < 1 || k > children.size())
      throw PolicyError(PolicyError::Kind::TooComplex, k_offset, "ANY threshold out of range");
    return PolicyNode::any_of(k, std::move(children));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  Token tok_{Token::Kind::End, {}, 0};
};

void print_node(const PolicyNode& n, std::string& out) {
  auto print_operand = [&out](const PolicyNode& c) {
    bool wrap = c.kind == PolicyNode::Kind::And || c.kind == PolicyNode::Kind::Or;
    if (wrap) out.push_back('(');
    print_node(c, out);
    if (wrap) out.push_back(')');
  };
  switch (n.kind) {
    case PolicyNode::Kind::Attr:
      out += n.name;
      return;
    case PolicyNode::Kind::And:
    case PolicyNode::Kind::Or: {
      const char* sep = n.kind == PolicyNode::Kind::And ? " AND " : " OR ";
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) out += sep;
        print_operand(n.children[i]);
      }
      return;
    }
    case PolicyNode::Kind::Any:
      out += "ANY " + std::to_string(n.threshold) + " OF (";
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) out += ", ";
        print_node(n.children[i], out);
      }
      out.push_back(')');
      return;
  }
}

bool eval_node(const PolicyNode& n, const AttributeSet& attrs) {
  switch (n.kind) {
    case PolicyNode::Kind::Attr:
      return attrs.contains(n.name);
    case PolicyNode::Kind::And:
      return std::all_of(n.children.begin(), n.children.end(),
                         [&](const PolicyNode& c) { return eval_node(c, attrs); });
    case PolicyNode::Kind::Or:
      return std::any_of(n.children.begin(), n.children.end(),
                         [&](const PolicyNode& c) { return eval_node(c, attrs); });
    case PolicyNode::Kind::Any: {
      std::uint32_t satisfied = 0;
      for (const auto& c : n.children) {
        if (eval_node(c, attrs) && ++satisfied >= n.threshold) return true;
      }
      return false;
    }
  }
  return false;
}

void collect_leaves(const PolicyNode& n, std::vector<std::string>& out) {
  if (n.kind == PolicyNode::Kind::Attr) {
    if (std::find(out.begin(), out.end(), n.name) == out.end()) out.push_back(n.name);
    return;
  }
  for (const auto& c : n.children) collect_leaves(c, out);
}

}  // namespace

PolicyNode PolicyNode::attr(std::string name) {
  PolicyNode n;
  n.kind = Kind::Attr;
  n.name = std::move(name);
  return n;
}

PolicyNode PolicyNode::all_of(std::vector<PolicyNode> children) {
  PolicyNode n;
  n.kind = Kind::And;
  n.children = std::move(children);
  return n;
}

PolicyNode PolicyNode::one_of(std::vector<PolicyNode> children) {
  PolicyNode n;
  n.kind = Kind::Or;
  n.children = std::move(children);
  return n;
}

PolicyNode PolicyNode::any_of(std::uint32_t k, std::vector<PolicyNode> children) {
  PolicyNode n;
  n.kind = Kind::Any;
  n.threshold = k;
  n.children = std::move(children);
  return n;
}

PolicyError::PolicyError(Kind kind, std::size_t offset, const std::string& what)
    : std::runtime_error(what + " at offset " + std::to_string(offset)),
      kind_(kind),
      offset_(offset) {}

PolicyFormula parse_policy(std::string_view text) {
  if (text.size() > kMaxPolicyBytes)
    throw PolicyError(PolicyError::Kind::TooLong, kMaxPolicyBytes, "policy longer than 4096 bytes");
  return Parser(text).parse();
}

std::string print_policy(const PolicyFormula& f) {
  std::string out;
  print_node(f.root, out);
  return out;
}

bool eval_policy(const PolicyFormula& f, const AttributeSet& attrs) { return eval_node(f.root, attrs); }

std::vector<std::string> leaf_names(const PolicyFormula& f) {
  std::vector<std::string> out;
  collect_leaves(f.root, out);
  return out;
}

std::size_t depth(const PolicyNode& n) {
  std::size_t d = 0;
  for (const auto& c : n.children) d = std::max(d, depth(c));
  return d + 1;
}

std::size_t leaf_count(const PolicyNode& n) {
  if (n.kind == PolicyNode::Kind::Attr) return 1;
  std::size_t total = 0;
  for (const auto& c : n.children) total += leaf_count(c);
  return total;
}

bool valid_attribute_name(std::string_view name) {
  if (name.empty() || name.size() > 128 || is_keyword(name)) return false;
  return std::all_of(name.begin(), name.end(), attr_char);
}

}  // namespace medledger::policy
