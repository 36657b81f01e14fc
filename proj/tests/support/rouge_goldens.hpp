#pragma once

// Hand-computed ROUGE fixtures shared by the unit and acceptance suites.

#include <string>
#include <vector>

#include "cbqg/rouge.hpp"

namespace cbqg::testing {

struct Golden {
  const char* candidate;
  const char* reference;
  char metric;  // '1', '2', 'L', 'S' (Lsum)
  double p, r, f;
};

inline RougeScore run_metric(char metric, const std::string& c, const std::string& r) {
  switch (metric) {
    case '1': return rouge_n(c, r, 1);
    case '2': return rouge_n(c, r, 2);
    case 'L': return rouge_l(c, r);
    default: return rouge_lsum(c, r);
  }
}

// Hand-computed values.
inline const std::vector<Golden> kRougeGoldens = {
    {"the cat sat", "the cat", '1', 2.0 / 3, 1.0, 0.8},
    {"the cat sat", "the cat", '2', 0.5, 1.0, 2.0 / 3},
    {"a c b", "a b c", 'L', 2.0 / 3, 2.0 / 3, 2.0 / 3},
    {"the quick brown fox", "the quick brown fox", '2', 1, 1, 1},
    {"a b", "c d", '1', 0, 0, 0},
    {"the the the", "the cat", '1', 1.0 / 3, 0.5, 0.4},
    {"police killed the gunman", "police kill the gunman", 'L', 0.75, 0.75, 0.75},
    {"the gunman kill police", "police killed the gunman", 'L', 0.5, 0.5, 0.5},
    {"Hello, World!", "hello world", '2', 1, 1, 1},
    {"route 66 west", "Route-66 East", '1', 2.0 / 3, 2.0 / 3, 2.0 / 3},
    {"route 66 west", "Route-66 East", '2', 0.5, 0.5, 0.5},
    {"", "a b", 'L', 0, 0, 0},
    {"!!!", "a", '1', 0, 0, 0},
    {"a b\nc d", "a b\nc d", 'S', 1, 1, 1},
    {"w3 w4\nw1 w2", "w1 w2 w3 w4", 'L', 0.5, 0.5, 0.5},
    {"w3 w4\nw1 w2", "w1 w2 w3 w4", 'S', 1, 1, 1},
    {"a x c\nd b e", "a b c\nd e", 'S', 5.0 / 6, 1.0, 10.0 / 11},
    {"a b", "a b\na b", 'S', 1.0, 0.5, 2.0 / 3},
    {"a b", "a b\n\n", 'S', 1, 1, 1},
    {"one two three four", "four three two one", '2', 0, 0, 0},
};

}  // namespace cbqg::testing
