#include "mpnet/graphml.hpp"

namespace mpnet::graphml {

std::string xml_escape(const std::string &s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
    case '&':
      out += "&amp;";
      break;
    case '<':
      out += "&lt;";
      break;
    case '>':
      out += "&gt;";
      break;
    case '"':
      out += "&quot;";
      break;
    case '\'':
      out += "&apos;";
      break;
    default:
      out.push_back(c);
    }
  }
  return out;
}

void write(std::ostream &os, const Graph &g) {
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\" "
        "xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" "
        "xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns "
        "http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n";
  for (std::size_t k = 0; k < g.node_keys.size(); ++k)
    os << "  <key id=\"n" << k << "\" for=\"node\" attr.name=\""
       << xml_escape(g.node_keys[k].name) << "\" attr.type=\""
       << g.node_keys[k].type << "\"/>\n";
  for (std::size_t k = 0; k < g.edge_keys.size(); ++k)
    os << "  <key id=\"e" << k << "\" for=\"edge\" attr.name=\""
       << xml_escape(g.edge_keys[k].name) << "\" attr.type=\""
       << g.edge_keys[k].type << "\"/>\n";
  os << "  <graph id=\"" << xml_escape(g.id)
     << "\" edgedefault=\"undirected\">\n";
  for (const auto &n : g.nodes) {
    os << "    <node id=\"" << xml_escape(n.id) << "\">";
    for (std::size_t k = 0; k < n.values.size() && k < g.node_keys.size(); ++k)
      os << "<data key=\"n" << k << "\">" << xml_escape(n.values[k])
         << "</data>";
    os << "</node>\n";
  }
  for (const auto &e : g.edges) {
    os << "    <edge source=\"" << xml_escape(e.source) << "\" target=\""
       << xml_escape(e.target) << "\">";
    for (std::size_t k = 0; k < e.values.size() && k < g.edge_keys.size(); ++k)
      os << "<data key=\"e" << k << "\">" << xml_escape(e.values[k])
         << "</data>";
    os << "</edge>\n";
  }
  os << "  </graph>\n</graphml>\n";
}

} // namespace mpnet::graphml
