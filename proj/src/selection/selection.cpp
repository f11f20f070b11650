#include "daedalus/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "daedalus/error.hpp"

namespace daedalus {
using nlohmann::json;

SelectionGeometry SelectionGeometry::rectangle(double x0, double y0, double x1, double y1) {
    SelectionGeometry g;
    g.kind = Kind::rectangle;
    g.min = {std::min(x0, x1), std::min(y0, y1)};
    g.max = {std::max(x0, x1), std::max(y0, y1)};
    return g;
}

SelectionGeometry SelectionGeometry::lasso(std::vector<Point> vertices) {
    SelectionGeometry g;
    g.kind = Kind::lasso;
    g.polygon = std::move(vertices);
    return g;
}

SelectionGeometry geometry_from_json(const json& doc) {
    auto fail = [](std::string detail) {
        throw Error(ErrorCode::validation, "invalid selection geometry", {std::move(detail)});
    };
    if (!doc.is_object() || !doc.contains("kind") || !doc["kind"].is_string()) fail("/geometry/kind: expected string");
    const auto kind = doc["kind"].get<std::string>();
    if (kind == "rectangle") {
        const auto& r = doc.contains("rect") ? doc["rect"] : json();
        if (!r.is_array() || r.size() != 4 || !std::all_of(r.begin(), r.end(), [](const json& v) { return v.is_number(); })) {
            fail("/geometry/rect: expected [x0, y0, x1, y1]");
        }
        return SelectionGeometry::rectangle(r[0].get<double>(), r[1].get<double>(), r[2].get<double>(),
                                            r[3].get<double>());
    }
    if (kind == "lasso") {
        const auto& pts = doc.contains("points") ? doc["points"] : json();
        if (!pts.is_array()) fail("/geometry/points: expected array of [x, y]");
        std::vector<Point> poly;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const auto& p = pts[i];
            if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
                fail("/geometry/points/" + std::to_string(i) + ": expected [x, y]");
            }
            poly.push_back({p[0].get<double>(), p[1].get<double>()});
        }
        return SelectionGeometry::lasso(std::move(poly));
    }
    fail("/geometry/kind: expected \"rectangle\" or \"lasso\"");
    return {};
}

bool point_in_polygon(Point p, std::span<const Point> poly) {
    const std::size_t n = poly.size();
    if (n < 3) return false;
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point a = poly[j], b = poly[i];
        // On the edge a-b?
        const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        if (cross == 0 && p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) && p.y >= std::min(a.y, b.y) &&
            p.y <= std::max(a.y, b.y)) {
            return true;
        }
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x_at = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < x_at) inside = !inside;
        }
    }
    return inside;
}

std::vector<std::size_t> hit_test(const SelectionGeometry& g, std::span<const float> coords,
                                  std::span<const std::uint8_t> visible) {
    const std::size_t rows = coords.size() / 2;
    if (!visible.empty() && visible.size() != rows) {
        throw Error(ErrorCode::invalid_argument, "visibility mask length differs from the row count");
    }
    std::vector<std::size_t> out;
    if (g.kind == SelectionGeometry::Kind::lasso && g.polygon.size() < 3) return out;
    double bx0 = g.min.x, by0 = g.min.y, bx1 = g.max.x, by1 = g.max.y;
    if (g.kind == SelectionGeometry::Kind::lasso) {
        bx0 = by0 = std::numeric_limits<double>::infinity();
        bx1 = by1 = -bx0;
        for (const auto& v : g.polygon) {
            bx0 = std::min(bx0, v.x);
            by0 = std::min(by0, v.y);
            bx1 = std::max(bx1, v.x);
            by1 = std::max(by1, v.y);
        }
    }
    for (std::size_t r = 0; r < rows; ++r) {
        if (!visible.empty() && !visible[r]) continue;
        const Point p{coords[2 * r], coords[2 * r + 1]};
        if (p.x < bx0 || p.x > bx1 || p.y < by0 || p.y > by1) continue;
        if (g.kind == SelectionGeometry::Kind::rectangle || point_in_polygon(p, g.polygon)) out.push_back(r);
    }
    return out;
}

SelectionMode parse_selection_mode(std::string_view text) {
    if (text == "replace") return SelectionMode::replace;
    if (text == "add") return SelectionMode::add;
    if (text == "remove") return SelectionMode::remove;
    throw Error(ErrorCode::invalid_argument, "unknown selection mode '" + std::string(text) + "'");
}

Selection update_selection(const Selection& current, std::span<const std::string> ids, SelectionMode mode) {
    Selection out = current;
    switch (mode) {
        case SelectionMode::replace:
            out.ids = std::set<std::string>(ids.begin(), ids.end());
            break;
        case SelectionMode::add:
            out.ids.insert(ids.begin(), ids.end());
            break;
        case SelectionMode::remove:
            for (const auto& id : ids) out.ids.erase(id);
            break;
    }
    return out;
}

std::vector<std::string> ids_of(const Dataset& dataset, std::span<const std::size_t> rows) {
    std::vector<std::string> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(dataset.particle(r).id);
    return out;
}

std::string format_percent(double percent) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", percent);
    std::string s(buf);
    if (s.find('.') != std::string::npos) {
        while (s.back() == '0') s.pop_back();
        if (s.back() == '.') s.pop_back();
    }
    if (s == "-0") s = "0";
    return s + "%";
}

SelectionStats selection_stats(const Selection& selection, const Dataset& dataset, const LabelState* labels,
                               const std::map<std::string, BinSpec, std::less<>>& bins) {
    std::vector<std::size_t> rows;
    rows.reserve(selection.ids.size());
    std::vector<std::string> unknown;
    for (const auto& id : selection.ids) {
        if (auto r = dataset.row_of(id)) {
            rows.push_back(*r);
        } else {
            unknown.push_back(id);
        }
    }
    if (!unknown.empty()) throw Error(ErrorCode::not_found, "selection holds unknown particle ids", std::move(unknown));

    SelectionStats stats;
    stats.size = rows.size();
    auto add = [&](const Partition& p) {
        AttributeStats a;
        a.attribute = p.bins.attribute;
        a.alphabet = p.alphabet;
        a.bins.resize(p.bins.size());
        for (std::size_t b = 0; b < p.bins.size(); ++b) a.bins[b].label = p.bins.labels[b];
        for (auto r : rows) {
            const auto c = p.codes[r];
            if (c >= 0) ++a.bins[static_cast<std::size_t>(c)].count;
        }
        for (auto& b : a.bins) {
            b.percent = stats.size ? 100.0 * static_cast<double>(b.count) / static_cast<double>(stats.size) : 0.0;
            b.percent_text = format_percent(b.percent);
        }
        if (p.alphabet) a.unlabeled = a.bins.back().count;
        stats.attributes.push_back(std::move(a));
    };
    for (const auto& desc : dataset.schema().descriptors()) {
        std::optional<BinSpec> b;
        if (auto it = bins.find(desc.name); it != bins.end()) b = it->second;
        add(auto_partition(dataset, desc.name, b, labels));
    }
    if (labels) {
        for (const auto& [id, alphabet] : labels->alphabets) add(make_partition(dataset, alphabet.name, std::nullopt, labels));
    }
    return stats;
}

json to_json(const SelectionStats& s) {
    json attrs = json::array();
    for (const auto& a : s.attributes) {
        json bins = json::array();
        for (const auto& b : a.bins) {
            bins.push_back(json{{"label", b.label}, {"count", b.count}, {"percent", b.percent}, {"percent_text", b.percent_text}});
        }
        json j{{"attribute", a.attribute}, {"alphabet", a.alphabet}, {"bins", std::move(bins)}};
        if (a.alphabet) j["unlabeled"] = a.unlabeled;
        attrs.push_back(std::move(j));
    }
    return json{{"size", s.size}, {"attributes", std::move(attrs)}};
}

json to_json(const Selection& s) {
    return json{{"ids", std::vector<std::string>(s.ids.begin(), s.ids.end())}, {"dataset", s.dataset}};
}

}  // namespace daedalus
