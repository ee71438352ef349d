// Copyright 2026 The MixAttn Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "mixattn/analysis.hpp"
#include "mixattn/error.hpp"

namespace mixattn::report {

enum class Format { kText, kCsv, kJson };

inline Format parse_format(const std::string& s) {
  if (s == "text") return Format::kText;
  if (s == "csv") return Format::kCsv;
  if (s == "json") return Format::kJson;
  throw Error("unknown format '" + s + "'");
}

using Cell = std::variant<std::int64_t, double, bool, std::string>;

/// A flat table emitted identically as text, CSV or JSON. Numbers are
/// rendered through the JSON serializer in every format so CSV and JSON
/// carry the same digits.
struct Table {
  std::string title;
  std::string note;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

inline nlohmann::ordered_json cell_json(const Cell& c) {
  return std::visit([](const auto& v) { return nlohmann::ordered_json(v); }, c);
}

inline std::string cell_text(const Cell& c) {
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  return cell_json(c).dump();
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline void emit(std::ostream& os, const Table& t, Format f) {
  switch (f) {
    case Format::kJson: {
      nlohmann::ordered_json j;
      j["title"] = t.title;
      if (!t.note.empty()) j["note"] = t.note;
      j["rows"] = nlohmann::ordered_json::array();
      for (const auto& row : t.rows) {
        nlohmann::ordered_json obj;
        for (std::size_t i = 0; i < t.columns.size(); ++i) obj[t.columns[i]] = cell_json(row[i]);
        j["rows"].push_back(std::move(obj));
      }
      os << j.dump(2) << "\n";
      break;
    }
    case Format::kCsv: {
      if (!t.note.empty()) os << "# " << t.note << "\n";
      for (std::size_t i = 0; i < t.columns.size(); ++i) {
        os << (i ? "," : "") << csv_escape(t.columns[i]);
      }
      os << "\n";
      for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_escape(cell_text(row[i]));
        os << "\n";
      }
      break;
    }
    case Format::kText: {
      std::vector<std::size_t> width(t.columns.size());
      for (std::size_t i = 0; i < t.columns.size(); ++i) width[i] = t.columns[i].size();
      for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], cell_text(row[i]).size());
      }
      if (!t.title.empty()) os << t.title << "\n";
      if (!t.note.empty()) os << "(" << t.note << ")\n";
      auto line = [&](auto&& get) {
        for (std::size_t i = 0; i < t.columns.size(); ++i) {
          std::string s = get(i);
          os << (i ? "  " : "") << s << std::string(width[i] - s.size(), ' ');
        }
        os << "\n";
      };
      line([&](std::size_t i) { return t.columns[i]; });
      for (const auto& row : t.rows) line([&](std::size_t i) { return cell_text(row[i]); });
      break;
    }
  }
}

inline std::string render(const Table& t, Format f) {
  std::ostringstream os;
  emit(os, t, f);
  return os.str();
}

// ---------------------------------------------------------------------------
// Analysis tables

inline Table footprint_table(const FootprintReport& r) {
  Table t;
  t.title = "kv footprint at T=" + std::to_string(r.tokens);
  t.note = "total_bytes=" + std::to_string(r.total_bytes) +
           " steady_bytes_per_token=" + std::to_string(r.steady_bytes_per_token);
  t.columns = {"group", "producer", "kind", "window", "entries", "bytes"};
  for (const auto& g : r.groups) {
    t.rows.push_back({std::int64_t{g.group_id}, std::int64_t{g.producer},
                      std::string(to_string(g.kind)), std::int64_t{g.window.value_or(0)}, g.entries,
                      g.bytes});
  }
  return t;
}

inline constexpr const char* kCapacityNote =
    "capacity counts cached tokens; activations and allocator overhead are not modeled";

inline Table capacity_table(const std::string& name, const CapacityReport& r) {
  Table t;
  t.title = "capacity";
  t.note = kCapacityNote;
  if (!r.warning.empty()) t.note += "; warning: " + r.warning;
  t.columns = {"config", "budget_bytes", "reserved_bytes", "element_bytes", "steady_bytes_per_token",
               "max_total_tokens", "unbounded"};
  t.rows.push_back({name, r.budget_bytes, r.reserved_bytes, r.element_bytes, r.steady_bytes_per_token,
                    r.unbounded ? std::int64_t{-1} : r.max_total_tokens, r.unbounded});
  return t;
}

inline Table reach_table(const std::string& name, const ReachabilityReport& r) {
  Table t;
  t.title = "receptive field of " + name + " at T=" + std::to_string(r.tokens);
  t.note = "max_lookback=" + std::to_string(r.max_lookback) +
           (r.unbounded ? " (unbounded)" : " (bounded)");
  t.columns = {"layer", "lookback"};
  for (std::size_t i = 0; i < r.layer_lookback.size(); ++i) {
    t.rows.push_back({static_cast<std::int64_t>(i + 1), r.layer_lookback[i]});
  }
  return t;
}

inline Table comparison_table(const LayoutComparison& cmp) {
  Table t;
  t.title = "layout comparison at T=" + std::to_string(cmp.tokens);
  t.note = kCapacityNote;
  t.columns = {"config",           "cache_groups",       "footprint_bytes", "steady_bytes_per_token",
               "capacity_tokens",  "capacity_unbounded", "max_lookback",    "unbounded_reach"};
  for (const auto& r : cmp.rows) {
    t.rows.push_back({r.name, r.cache_groups, r.footprint_bytes, r.steady_bytes_per_token,
                      r.capacity_unbounded ? std::int64_t{-1} : r.capacity_tokens,
                      r.capacity_unbounded, r.max_lookback, r.unbounded_reach});
  }
  return t;
}

}  // namespace mixattn::report
