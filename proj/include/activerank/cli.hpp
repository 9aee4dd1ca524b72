#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "activerank/corpus.hpp"

namespace activerank {

/// Runs one command line (args excludes the program name). Returns the
/// process exit status. Failures print a single line
/// "error\t<code>\t<message>" to `err`; usage problems also print help.
int dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err);

/// Query file: one "query_id<TAB>text<TAB>embedding" record per line, where
/// embedding is an inline JSON array or a path (relative to the query file)
/// to an embedding file holding a record with the query id, or exactly one
/// record.
std::vector<QueryRecord> load_queries(const std::string& path);

}  // namespace activerank
