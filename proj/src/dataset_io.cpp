#include "symrl/dynamics.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace symrl {

namespace {

constexpr std::string_view kProvenancePrefix = "# provenance: ";
constexpr std::string_view kLayoutPrefix = "# layout: regressors=";

void append_number(std::string& out, double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    out.append(buf, res.ptr);
}

std::vector<std::string_view> split_line(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t end = line.find(',', start);
        if (end == std::string_view::npos) {
            cells.push_back(line.substr(start));
            return cells;
        }
        cells.push_back(line.substr(start, end - start));
        start = end + 1;
    }
}

} // namespace

CsvError::CsvError(std::size_t row, std::string column, const std::string& what)
    : DataError("row " + std::to_string(row) + ", column '" + column + "': " + what), row_(row),
      column_(std::move(column)) {}

std::string dataset_to_csv(const Dataset& data) {
    std::string out;
    out.reserve(data.rows() * (data.regressor_length() + data.n_targets()) * 24 + 256);
    if (!data.provenance().empty()) {
        out += kProvenancePrefix;
        out += data.provenance();
        out += '\n';
    }
    out += kLayoutPrefix;
    out += std::to_string(data.regressor_length()) + " targets=" + std::to_string(data.n_targets()) + "\n";
    bool first = true;
    for (const auto& names : {data.regressor_names(), data.target_names()})
        for (const auto& n : names) {
            if (!first)
                out += ',';
            out += n;
            first = false;
        }
    out += '\n';
    const auto& r = data.regressors();
    const auto& t = data.targets();
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        for (Eigen::Index j = 0; j < r.cols(); ++j) {
            if (j)
                out += ',';
            append_number(out, r(i, j));
        }
        for (Eigen::Index j = 0; j < t.cols(); ++j) {
            out += ',';
            append_number(out, t(i, j));
        }
        out += '\n';
    }
    return out;
}

Dataset dataset_from_csv(std::string_view text) {
    std::string provenance;
    long n_regressors = -1;
    std::vector<std::string> header;
    std::vector<double> values;
    std::size_t data_rows = 0;

    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (line.empty())
            continue;
        if (line.front() == '#') {
            if (line.starts_with(kProvenancePrefix)) {
                provenance = std::string(line.substr(kProvenancePrefix.size()));
            } else if (line.starts_with(kLayoutPrefix)) {
                auto rest = line.substr(kLayoutPrefix.size());
                auto res = std::from_chars(rest.data(), rest.data() + rest.size(), n_regressors);
                if (res.ec != std::errc())
                    throw CsvError(0, "layout", "malformed layout comment");
            }
            continue;
        }
        const auto cells = split_line(line);
        if (header.empty()) {
            for (auto c : cells)
                header.emplace_back(c);
            continue;
        }
        if (cells.size() != header.size())
            throw CsvError(data_rows + 1, cells.size() < header.size() ? header[cells.size() - 1] : header.back(),
                           "expected " + std::to_string(header.size()) + " cells, found " +
                               std::to_string(cells.size()));
        for (std::size_t j = 0; j < cells.size(); ++j) {
            double v = 0.0;
            const auto c = cells[j];
            auto res = std::from_chars(c.data(), c.data() + c.size(), v);
            if (c.empty() || res.ec != std::errc() || res.ptr != c.data() + c.size())
                throw CsvError(data_rows + 1, header[j], "non-numeric cell '" + std::string(c) + "'");
            values.push_back(v);
        }
        ++data_rows;
    }
    if (header.empty())
        throw DataError("CSV file has no header row");

    std::size_t n_reg = 0;
    if (n_regressors >= 0) {
        n_reg = static_cast<std::size_t>(n_regressors);
    } else {
        // Without a layout comment, columns ending in "_next" or "_kp1" are targets.
        while (n_reg < header.size() && !header[n_reg].ends_with("_next") && !header[n_reg].ends_with("_kp1"))
            ++n_reg;
    }
    if (n_reg == 0 || n_reg >= header.size())
        throw DataError("CSV header does not match the declared regressor/target layout");
    if (data_rows == 0)
        throw DataError("CSV file has no data rows");

    const std::size_t cols = header.size();
    Eigen::MatrixXd r(static_cast<Eigen::Index>(data_rows), static_cast<Eigen::Index>(n_reg));
    Eigen::MatrixXd t(static_cast<Eigen::Index>(data_rows), static_cast<Eigen::Index>(cols - n_reg));
    for (std::size_t i = 0; i < data_rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            const double v = values[i * cols + j];
            if (j < n_reg)
                r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            else
                t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - n_reg)) = v;
        }
    return Dataset(std::move(r), std::move(t), std::vector<std::string>(header.begin(), header.begin() + static_cast<long>(n_reg)),
                   std::vector<std::string>(header.begin() + static_cast<long>(n_reg), header.end()), provenance);
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write " + path.string());
    out << dataset_to_csv(data);
    if (!out)
        throw DataError("failed writing " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot read dataset " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return dataset_from_csv(ss.str());
}

} // namespace symrl
