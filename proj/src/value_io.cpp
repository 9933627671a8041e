#include "symrl/rl.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace symrl {

namespace {

void append_number(std::string& out, double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

double parse_number(std::string_view cell, std::size_t line_no) {
    double v = 0.0;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw DataError("value function line " + std::to_string(line_no) + ": bad number '" + std::string(cell) + "'");
    return v;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (std::size_t end; (end = line.find(',', start)) != std::string_view::npos; start = end + 1)
        cells.push_back(line.substr(start, end - start));
    cells.push_back(line.substr(start));
    return cells;
}

} // namespace

std::string value_function_to_csv(const ValueFunction& value) {
    std::string out = "# symrl value function\n";
    for (const auto& axis : value.grid().axes) {
        out += axis.wrap ? "axis,wrap" : "axis,clamp";
        for (double v : axis.nodes) {
            out += ',';
            append_number(out, v);
        }
        out += '\n';
    }
    out += "value\n";
    for (double v : value.values()) {
        append_number(out, v);
        out += '\n';
    }
    return out;
}

ValueFunction value_function_from_csv(std::string_view text) {
    StateGrid grid;
    std::vector<double> values;
    bool in_values = false;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    for (std::string raw; std::getline(in, raw);) {
        ++line_no;
        std::string_view line = raw;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (line.empty() || line.front() == '#')
            continue;
        if (in_values) {
            values.push_back(parse_number(line, line_no));
            continue;
        }
        if (line == "value") {
            in_values = true;
            continue;
        }
        const auto cells = split(line);
        if (cells.size() < 4 || cells[0] != "axis" || (cells[1] != "wrap" && cells[1] != "clamp"))
            throw DataError("value function line " + std::to_string(line_no) + ": expected an axis line");
        Axis axis;
        axis.wrap = cells[1] == "wrap";
        for (std::size_t i = 2; i < cells.size(); ++i)
            axis.nodes.push_back(parse_number(cells[i], line_no));
        grid.axes.push_back(std::move(axis));
    }
    if (!in_values)
        throw DataError("value function has no value block");
    try {
        return ValueFunction(std::move(grid), std::move(values));
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("value function: ") + e.what());
    }
}

void save_value_function(const ValueFunction& value, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    out << value_function_to_csv(value);
    if (!out)
        throw DataError("cannot write " + path.string());
}

ValueFunction load_value_function(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot read value function " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return value_function_from_csv(ss.str());
}

std::string trajectory_to_csv(const RolloutResult& result, double ts, std::span<const std::string> state_names,
                              std::span<const std::string> input_names) {
    std::string out = "time";
    for (const auto& n : state_names)
        out += "," + n;
    for (const auto& n : input_names)
        out += "," + n;
    out += ",r\n";
    for (std::size_t k = 0; k < result.trajectory.size(); ++k) {
        const auto& t = result.trajectory[k];
        append_number(out, static_cast<double>(k) * ts);
        for (double v : t.x) {
            out += ',';
            append_number(out, v);
        }
        for (double v : t.u) {
            out += ',';
            append_number(out, v);
        }
        out += ',';
        append_number(out, t.r);
        out += '\n';
    }
    return out;
}

} // namespace symrl
