#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mpnet::graphml {

/// Attribute declaration; `type` is a GraphML attr.type
/// (string, double, int, boolean).
struct Key {
  std::string name;
  std::string type;
};

struct Node {
  std::string id;
  std::vector<std::string> values;
};

struct Edge {
  std::string source;
  std::string target;
  std::vector<std::string> values;
};

/// Undirected graph; node and edge values align with their key lists.
struct Graph {
  std::string id = "G";
  std::vector<Key> node_keys;
  std::vector<Key> edge_keys;
  std::vector<Node> nodes;
  std::vector<Edge> edges;
};

void write(std::ostream &os, const Graph &g);

std::string xml_escape(const std::string &s);

} // namespace mpnet::graphml
