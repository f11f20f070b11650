#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "daedalus/labelstore.hpp"
#include "daedalus/layout.hpp"
#include "daedalus/model.hpp"

namespace daedalus {

struct Point {
    double x = 0;
    double y = 0;
};

struct SelectionGeometry {
    enum class Kind { rectangle, lasso };
    Kind kind = Kind::rectangle;
    Point min;  // rectangle corners, normalized by rectangle()
    Point max;
    std::vector<Point> polygon;  // lasso vertices; closed implicitly

    static SelectionGeometry rectangle(double x0, double y0, double x1, double y1);
    static SelectionGeometry lasso(std::vector<Point> vertices);
};

/// Throws Error(validation) with field paths.
SelectionGeometry geometry_from_json(const nlohmann::json& doc);

/// Even-odd rule; points on an edge or vertex count as inside. Fewer than 3
/// vertices contain nothing.
bool point_in_polygon(Point p, std::span<const Point> polygon);

/// Rows whose (x, y) lies in the geometry. `coords` holds rows x 2 values;
/// rows with visible[row] == 0 are never hit (an empty mask hides nothing).
std::vector<std::size_t> hit_test(const SelectionGeometry& geometry, std::span<const float> coords,
                                  std::span<const std::uint8_t> visible = {});

struct Selection {
    std::set<std::string> ids;
    std::string dataset;  // fingerprint

    friend bool operator==(const Selection&, const Selection&) = default;
};

enum class SelectionMode { replace, add, remove };
SelectionMode parse_selection_mode(std::string_view text);

Selection update_selection(const Selection& current, std::span<const std::string> ids, SelectionMode mode);
/// Particle ids of `rows`.
std::vector<std::string> ids_of(const Dataset& dataset, std::span<const std::size_t> rows);

struct BinStat {
    std::string label;
    std::size_t count = 0;
    double percent = 0;        // count / selection size x 100
    std::string percent_text;  // e.g. "10.2%"
};

struct AttributeStats {
    std::string attribute;
    bool alphabet = false;
    std::vector<BinStat> bins;
    std::size_t unlabeled = 0;  // alphabets only
};

struct SelectionStats {
    std::size_t size = 0;
    std::vector<AttributeStats> attributes;
};

/// Percent with at most two decimals and trailing zeros dropped: "10.2%", "74.26%".
std::string format_percent(double percent);

/// Per attribute (schema order) and per alphabet (id order) counts over the
/// selection. Numeric attributes use `bins` when given, else default bins
/// over the whole dataset. Unknown ids throw Error(not_found).
SelectionStats selection_stats(const Selection& selection, const Dataset& dataset, const LabelState* labels,
                               const std::map<std::string, BinSpec, std::less<>>& bins = {});

nlohmann::json to_json(const SelectionStats& stats);
nlohmann::json to_json(const Selection& selection);

}  // namespace daedalus
