#include "symrl/model.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace symrl {

namespace {

std::string trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return std::string(s);
}

double parse_double(const std::string& s, std::size_t line) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw DataError("model file line " + std::to_string(line) + ": malformed number '" + s + "'");
    return v;
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(trim(item));
    return out;
}

} // namespace

std::string serialize_models(std::span<const FeatureModel> models) {
    std::string out = "# symrl model file\n";
    for (const auto& m : models) {
        out += "[model]\n";
        out += "target = " + m.target_name + "\n";
        out += "regressors = ";
        for (std::size_t i = 0; i < m.regressor_names.size(); ++i)
            out += (i ? "," : "") + m.regressor_names[i];
        out += "\n";
        out += "intercept = " + format_fixed(m.intercept, -1) + "\n";
        for (std::size_t i = 0; i < m.features.size(); ++i)
            out += "term = " + format_fixed(m.coefficients[i], -1) + " ; " + to_canonical_text(m.features[i], -1) + "\n";
        out += "text = " + model_to_text(m) + "\n";
        out += "[end]\n";
    }
    return out;
}

std::vector<FeatureModel> deserialize_models(std::string_view text) {
    std::vector<FeatureModel> models;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    bool open = false;
    FeatureModel cur;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty() || line.front() == '#')
            continue;
        if (line == "[model]") {
            if (open)
                throw DataError("model file line " + std::to_string(line_no) + ": nested [model]");
            open = true;
            cur = FeatureModel{};
            continue;
        }
        if (line == "[end]") {
            if (!open)
                throw DataError("model file line " + std::to_string(line_no) + ": [end] without [model]");
            for (const auto& f : cur.features)
                if (f.max_variable() >= static_cast<long>(cur.regressor_names.size()))
                    throw DataError("model for '" + cur.target_name + "' references an unknown regressor");
            models.push_back(std::move(cur));
            open = false;
            continue;
        }
        const auto eq = line.find('=');
        if (!open || eq == std::string::npos)
            throw DataError("model file line " + std::to_string(line_no) + ": unexpected content");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key == "target") {
            cur.target_name = value;
        } else if (key == "regressors") {
            cur.regressor_names = split_commas(value);
        } else if (key == "intercept") {
            cur.intercept = parse_double(value, line_no);
        } else if (key == "term") {
            const auto semi = value.find(';');
            if (semi == std::string::npos)
                throw DataError("model file line " + std::to_string(line_no) + ": term needs 'coef ; expr'");
            cur.coefficients.push_back(parse_double(trim(std::string_view(value).substr(0, semi)), line_no));
            try {
                cur.features.push_back(parse_expression(trim(std::string_view(value).substr(semi + 1))));
            } catch (const StructuralError& e) {
                throw DataError("model file line " + std::to_string(line_no) + ": " + e.what());
            }
        } else if (key != "text") {
            throw DataError("model file line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    if (open)
        throw DataError("model file ends inside a [model] block");
    return models;
}

void save_models(std::span<const FeatureModel> models, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write " + path.string());
    out << serialize_models(models);
}

std::vector<FeatureModel> load_models(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot read model file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return deserialize_models(ss.str());
}

} // namespace symrl
