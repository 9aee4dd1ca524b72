#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace activerank {

struct RankedEntry {
  std::string id;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based
};

/// Full ordering of a query's passages, best first.
struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;

  std::size_t size() const { return entries.size(); }
};

}  // namespace activerank
