#include "hypolab/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "hypolab/errors.hpp"
#include "hypolab/expr.hpp"
#include "hypolab/io.hpp"

namespace hypolab {

namespace {

class TomlParser {
public:
    explicit TomlParser(const std::string& text) : text_(text) {}

    json run() {
        json root = json::object();
        json* table = &root;
        while (!eof()) {
            skip_blank();
            if (eof()) break;
            if (peek() == '[') {
                table = &open_table(root);
                continue;
            }
            parse_key_value(*table);
        }
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& msg) {
        throw ConfigError("config line " + std::to_string(line_) + ": " + msg);
    }

    bool eof() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }

    void advance() {
        if (text_[pos_] == '\n') ++line_;
        ++pos_;
    }

    void skip_ws_inline() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) advance();
    }

    void skip_blank() {
        while (!eof()) {
            char c = peek();
            if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
                advance();
            } else if (c == '#') {
                while (!eof() && peek() != '\n') advance();
            } else {
                break;
            }
        }
    }

    std::string bare_key() {
        skip_ws_inline();
        size_t start = pos_;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                          peek() == '-'))
            advance();
        if (pos_ == start) fail("expected a key");
        return text_.substr(start, pos_ - start);
    }

    json& open_table(json& root) {
        advance();  // '['
        json* t = &root;
        while (true) {
            std::string key = bare_key();
            if (!t->contains(key)) (*t)[key] = json::object();
            t = &(*t)[key];
            skip_ws_inline();
            if (peek() == '.') {
                advance();
                continue;
            }
            break;
        }
        if (eof() || peek() != ']') fail("expected ']'");
        advance();
        end_of_line();
        return *t;
    }

    void parse_key_value(json& table) {
        json* t = &table;
        std::string key = bare_key();
        skip_ws_inline();
        while (peek() == '.') {
            advance();
            if (!t->contains(key)) (*t)[key] = json::object();
            t = &(*t)[key];
            key = bare_key();
            skip_ws_inline();
        }
        if (eof() || peek() != '=') fail("expected '=' after key " + key);
        advance();
        (*t)[key] = parse_value();
        end_of_line();
    }

    void end_of_line() {
        skip_ws_inline();
        if (!eof() && peek() == '#')
            while (!eof() && peek() != '\n') advance();
        if (!eof() && peek() != '\n') fail("unexpected trailing characters");
    }

    json parse_value() {
        skip_blank();
        if (eof()) fail("expected a value");
        char c = peek();
        if (c == '"') return parse_string();
        if (c == '[') return parse_array();
        if (c == '{') return parse_inline_table();
        return parse_scalar();
    }

    json parse_inline_table() {
        advance();  // '{'
        json obj = json::object();
        skip_blank();
        if (!eof() && peek() == '}') {
            advance();
            return obj;
        }
        while (true) {
            std::string key = bare_key();
            skip_ws_inline();
            if (eof() || peek() != '=') fail("expected '=' in inline table");
            advance();
            obj[key] = parse_value();
            skip_blank();
            if (eof()) fail("unterminated inline table");
            if (peek() == ',') {
                advance();
                skip_blank();
                continue;
            }
            if (peek() == '}') {
                advance();
                return obj;
            }
            fail("expected ',' or '}' in inline table");
        }
    }

    json parse_string() {
        advance();  // '"'
        std::string out;
        while (!eof() && peek() != '"') {
            if (peek() == '\\') {
                advance();
                if (eof()) fail("dangling escape");
                char e = peek();
                if (e == 'n') out += '\n';
                else if (e == 't') out += '\t';
                else out += e;
                advance();
            } else {
                out += peek();
                advance();
            }
        }
        if (eof()) fail("unterminated string");
        advance();
        return json(out);
    }

    json parse_array() {
        advance();  // '['
        json arr = json::array();
        while (true) {
            skip_blank();
            if (eof()) fail("unterminated array");
            if (peek() == ']') {
                advance();
                return arr;
            }
            arr.push_back(parse_value());
            skip_blank();
            if (!eof() && peek() == ',') advance();
        }
    }

    json parse_scalar() {
        size_t start = pos_;
        while (!eof() && peek() != '\n' && peek() != ',' && peek() != ']' && peek() != '}' &&
               peek() != '#')
            advance();
        std::string tok = text_.substr(start, pos_ - start);
        while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' || tok.back() == '\r'))
            tok.pop_back();
        if (tok == "true") return json(true);
        if (tok == "false") return json(false);
        const bool looks_float = tok.find_first_of(".eE") != std::string::npos;
        try {
            size_t used = 0;
            if (!looks_float) {
                long long v = std::stoll(tok, &used);
                if (used == tok.size()) return json(v);
            }
            double d = std::stod(tok, &used);
            if (used == tok.size()) return json(d);
        } catch (const std::exception&) {
        }
        fail("cannot parse value '" + tok + "'");
    }

    const std::string& text_;
    size_t pos_ = 0;
    long line_ = 1;
};

const std::map<std::string, std::vector<std::string>>& allowed_keys() {
    static const std::map<std::string, std::vector<std::string>> keys = {
        {"", {"schema", "operator", "grid", "domain", "run", "output"}},
        {"operator", {"gallery", "params", "user", "shift_eps", "c"}},
        {"operator.user", {"dim", "a", "v"}},
        {"grid", {"bounds", "resolution"}},
        {"domain",
         {"shape", "lens_x0", "lens_h0", "lens_eps", "ball_center", "ball_radius", "box_lo",
          "box_hi"}},
        {"run",
         {"seed", "f", "phi", "n_list", "compact", "y0", "m", "delta", "draws", "samples",
          "start", "step_budget", "source", "resolutions", "target", "eps_list",
          "export_paths"}},
        {"run.compact", {"type", "center", "radius"}},
        {"output", {"directory", "formats"}},
    };
    return keys;
}

void reject_unknown(const json& obj, const std::string& section) {
    auto it = allowed_keys().find(section);
    if (it == allowed_keys().end()) return;
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const auto& k : it->second) ok = ok || k == key;
        if (!ok)
            throw ConfigError("unknown key '" + (section.empty() ? key : section + "." + key) +
                              "'");
        // params values are free-form; recurse elsewhere.
        std::string child = section.empty() ? key : section + "." + key;
        if (value.is_object() && child != "operator.params") reject_unknown(value, child);
    }
}

Eigen::VectorXd to_vector(const json& arr, const std::string& what) {
    if (!arr.is_array() || arr.empty())
        throw ConfigError(what + " must be a nonempty array");
    Eigen::VectorXd v(arr.size());
    for (size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number()) throw ConfigError(what + " must hold numbers");
        v[static_cast<long>(i)] = arr[i].get<double>();
    }
    return v;
}

}  // namespace

json parse_toml_subset(const std::string& text) {
    return TomlParser(text).run();
}

json load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw ConfigError("cannot open config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    if (path.extension() == ".json") return json::parse(text);
    if (path.extension() == ".toml") return parse_toml_subset(text);
    // Sniff: JSON starts with '{'.
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        return c == '{' ? json::parse(text) : parse_toml_subset(text);
    }
    throw ConfigError("empty config file");
}

void apply_override(json& config, const std::string& dotted_key, const std::string& value) {
    json parsed;
    try {
        json doc = parse_toml_subset("v = " + value);
        parsed = doc["v"];
    } catch (const ConfigError&) {
        parsed = json(value);  // bare strings
    }
    json* t = &config;
    std::string rest = dotted_key;
    while (true) {
        auto dot = rest.find('.');
        if (dot == std::string::npos) {
            (*t)[rest] = parsed;
            return;
        }
        std::string head = rest.substr(0, dot);
        if (!t->contains(head) || !(*t)[head].is_object()) (*t)[head] = json::object();
        t = &(*t)[head];
        rest = rest.substr(dot + 1);
    }
}

ExperimentConfig ExperimentConfig::validate(json config, const std::string& command) {
    if (!config.is_object()) throw ConfigError("config must be a table");
    if (!config.contains("schema") || !config["schema"].is_number_integer() ||
        config["schema"].get<long>() != 1)
        throw ConfigError("config must declare schema = 1");
    reject_unknown(config, "");
    if (command != "gallery-list") {
        for (const char* section : {"operator", "grid", "domain"})
            if (!config.contains(section))
                throw ConfigError(std::string("missing [") + section + "] section");
    }
    ExperimentConfig out;
    out.raw = std::move(config);
    if (out.raw.contains("run") && out.raw["run"].contains("seed")) {
        if (!out.raw["run"]["seed"].is_number_integer())
            throw ConfigError("run.seed must be an integer");
        out.seed = out.raw["run"]["seed"].get<std::uint64_t>();
    } else if (command == "harnack" || command == "smp" || command == "hopf") {
        throw ConfigError("run.seed is mandatory for randomized suites");
    }
    return out;
}

OperatorSpec ExperimentConfig::make_operator() const {
    const json& op = raw.at("operator");
    OperatorSpec spec;
    if (op.contains("gallery")) {
        std::map<std::string, std::string> params;
        if (op.contains("params"))
            for (const auto& [k, v] : op["params"].items())
                params[k] = v.is_string() ? v.get<std::string>() : v.dump();
        spec = gallery(op["gallery"].get<std::string>(), params);
    } else if (op.contains("user")) {
        const json& user = op["user"];
        int dim = user.at("dim").get<int>();
        const json& a = user.at("a");
        if (!a.is_array() || static_cast<int>(a.size()) != dim)
            throw ConfigError("operator.user.a must be a dim x dim array of expressions");
        std::vector<std::vector<Expr>> entries(dim);
        for (int i = 0; i < dim; ++i) {
            if (!a[i].is_array() || static_cast<int>(a[i].size()) != dim)
                throw ConfigError("operator.user.a must be a dim x dim array of expressions");
            for (int j = 0; j < dim; ++j)
                entries[i].push_back(Expr::parse(a[i][j].get<std::string>(), dim));
        }
        Expr v_expr = Expr::parse(user.value("v", "1"), dim);
        spec.dim = dim;
        spec.a = [entries, dim](const Eigen::VectorXd& x) {
            Eigen::MatrixXd m(dim, dim);
            std::span<const double> xs(x.data(), static_cast<size_t>(x.size()));
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j) m(i, j) = entries[i][j].eval(xs);
            return m;
        };
        spec.v = [v_expr](const Eigen::VectorXd& x) {
            return v_expr.eval(std::span<const double>(x.data(), static_cast<size_t>(x.size())));
        };
        spec.c = [](const Eigen::VectorXd&) { return 0.0; };
        spec.hypo_tag = HypoTag::AssertedByUser;
        spec.name = "user";
    } else {
        throw ConfigError("operator needs either 'gallery' or 'user'");
    }
    if (op.contains("c")) {
        Expr c_expr = Expr::parse(op["c"].get<std::string>(), spec.dim);
        spec.c = [c_expr](const Eigen::VectorXd& x) {
            return c_expr.eval(std::span<const double>(x.data(), static_cast<size_t>(x.size())));
        };
    }
    if (op.contains("shift_eps")) spec.epsilon = op["shift_eps"].get<double>();
    if (spec.epsilon < 0.0) throw ConfigError("shift_eps must be >= 0");
    return spec;
}

Grid ExperimentConfig::make_grid() const {
    const json& grid = raw.at("grid");
    if (!grid.contains("bounds")) throw ConfigError("grid.bounds required");
    std::vector<std::array<double, 2>> bounds;
    for (const auto& b : grid["bounds"]) {
        if (!b.is_array() || b.size() != 2) throw ConfigError("grid.bounds entries are [lo, hi]");
        bounds.push_back({b[0].get<double>(), b[1].get<double>()});
    }
    std::vector<long> res;
    const json& r = grid.at("resolution");
    if (r.is_number_integer()) {
        res.assign(bounds.size(), r.get<long>());
    } else {
        for (const auto& v : r) res.push_back(v.get<long>());
    }
    return build_grid(bounds, res);
}

ShapeInfo ExperimentConfig::shape() const {
    const json& dom = raw.at("domain");
    std::string kind = dom.at("shape").get<std::string>();
    ShapeInfo s;
    if (kind == "lens") {
        s.kind = ShapeInfo::Kind::Lens;
        s.x0 = to_vector(dom.at("lens_x0"), "domain.lens_x0");
        s.h0 = to_vector(dom.at("lens_h0"), "domain.lens_h0");
        double norm = s.h0.norm();
        if (norm == 0.0) throw ConfigError("domain.lens_h0 must be nonzero");
        s.h0 /= norm;
        s.lens_eps = dom.at("lens_eps").get<double>();
        s.label = "lens";
    } else if (kind == "ball") {
        s.kind = ShapeInfo::Kind::Ball;
        s.center = to_vector(dom.at("ball_center"), "domain.ball_center");
        s.radius = dom.at("ball_radius").get<double>();
        s.label = "ball";
    } else if (kind == "box") {
        s.kind = ShapeInfo::Kind::Box;
        s.box_lo = to_vector(dom.at("box_lo"), "domain.box_lo");
        s.box_hi = to_vector(dom.at("box_hi"), "domain.box_hi");
        s.label = "box";
    } else {
        throw ConfigError("domain.shape must be lens, ball or box");
    }
    return s;
}

DomainMask ExperimentConfig::make_mask(const Grid& grid) const {
    return build_mask(shape(), grid);
}

std::string ExperimentConfig::out_dir(const std::string& cli_override) const {
    if (!cli_override.empty()) return cli_override;
    if (raw.contains("output") && raw["output"].contains("directory"))
        return raw["output"]["directory"].get<std::string>();
    return "out";
}

std::vector<std::string> ExperimentConfig::formats() const {
    std::vector<std::string> out{"json"};
    if (raw.contains("output") && raw["output"].contains("formats")) {
        out.clear();
        for (const auto& f : raw["output"]["formats"]) out.push_back(f.get<std::string>());
    }
    return out;
}

const json& ExperimentConfig::run() const {
    static const json empty = json::object();
    return raw.contains("run") ? raw.at("run") : empty;
}

std::string ExperimentConfig::config_hash() const {
    return hex64(fnv1a(raw.dump()));
}

}  // namespace hypolab
