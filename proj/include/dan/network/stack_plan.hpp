#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dan {

/// E: RepGen encoder, D: RepGen decoder, R: RepMerg block.
enum class Block : char { encode = 'E', decode = 'D', merge = 'R' };

class StackGrammarError : public std::invalid_argument {
 public:
  StackGrammarError(const std::string& spec, std::size_t position, const std::string& what)
      : std::invalid_argument("stack spec '" + spec + "': position " + std::to_string(position) + ": " + what),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Parsed block composition, restricted to the grammar (ED)+ R+.
struct StackPlan {
  std::vector<Block> tokens;

  std::size_t count(Block b) const {
    std::size_t n = 0;
    for (Block t : tokens) n += t == b;
    return n;
  }

  std::string str() const {
    std::string s;
    for (Block t : tokens) s.push_back(static_cast<char>(t));
    return s;
  }

  friend bool operator==(const StackPlan&, const StackPlan&) = default;
};

inline StackPlan parse_stack(std::string_view spec) {
  const std::string s(spec);
  if (spec.empty()) throw StackGrammarError(s, 0, "empty stack spec");
  StackPlan plan;
  std::size_t i = 0;
  while (i < spec.size() && spec[i] == 'E') {
    if (i + 1 >= spec.size() || spec[i + 1] != 'D') {
      throw StackGrammarError(s, i + 1, "expected 'D' after 'E'");
    }
    plan.tokens.push_back(Block::encode);
    plan.tokens.push_back(Block::decode);
    i += 2;
  }
  if (plan.tokens.empty()) throw StackGrammarError(s, 0, "stack must start with 'E'");
  if (i >= spec.size()) throw StackGrammarError(s, i, "expected at least one 'R'");
  if (spec[i] != 'R') throw StackGrammarError(s, i, std::string("expected 'E' or 'R', found '") + spec[i] + "'");
  while (i < spec.size()) {
    if (spec[i] != 'R') {
      throw StackGrammarError(s, i, std::string("expected 'R', found '") + spec[i] + "'");
    }
    plan.tokens.push_back(Block::merge);
    ++i;
  }
  return plan;
}

}  // namespace dan
