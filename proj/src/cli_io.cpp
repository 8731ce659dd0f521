#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <sfa/cli_io.hpp>
#include <sfa/error.hpp>

namespace sfa {

namespace {

std::string trim(std::string_view s)
{
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    for (auto& t : split(s, ',')) {
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

std::string unquote(std::string s)
{
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

bool parse_double(const std::string& s, double& out)
{
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && first != last;
}

Error config_error(const std::string& key, const std::string& value, const std::string& what)
{
    return Error(ErrorCode::InvalidConfig, "config key '" + key + "' = '" + value + "': " + what);
}

double as_double(const std::string& key, const std::string& v)
{
    double d = 0.0;
    if (!parse_double(v, d)) throw config_error(key, v, "expected a number");
    return d;
}

long as_long(const std::string& key, const std::string& v)
{
    long x = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) throw config_error(key, v, "expected an integer");
    return x;
}

bool as_bool(const std::string& key, const std::string& v)
{
    const std::string l = lower(v);
    if (l == "1" || l == "true" || l == "yes" || l == "on") return true;
    if (l == "0" || l == "false" || l == "no" || l == "off") return false;
    throw config_error(key, v, "expected true or false");
}

Selector parse_selector(const std::string& key, const std::string& v)
{
    const std::string l = lower(v);
    if (l == "none" || l == "noz") return Selector::None;
    if (l == "all" || l == "allz") return Selector::All;
    if (l == "psl") return Selector::PSL;
    if (l == "pdl") return Selector::PDL;
    throw config_error(key, v, "expected none, all, psl or pdl");
}

Stage2 parse_stage2(const std::string& key, const std::string& v)
{
    const std::string l = lower(v);
    if (l == "cols") return Stage2::Cols;
    if (l == "mle") return Stage2::Mle;
    throw config_error(key, v, "expected cols or mle");
}

void parse_penalty(const std::string& key, const std::string& v, PenaltyPlan& plan)
{
    const std::string l = lower(v);
    if (l == "cv1se") {
        plan.rule = PenaltyRule::Cv1se;
    } else if (l == "cvmin") {
        plan.rule = PenaltyRule::CvMin;
    } else if (l == "plugin") {
        plan.rule = PenaltyRule::PlugIn;
    } else if (l.rfind("fixed=", 0) == 0) {
        plan.rule = PenaltyRule::Fixed;
        plan.fixed_level.value = as_double(key, l.substr(6));
        if (!(plan.fixed_level.value >= 0.0)) throw config_error(key, v, "penalty level must be non-negative");
    } else {
        throw config_error(key, v, "expected cv1se, cvmin, plugin or fixed=<x>");
    }
}

EstimatorSpec parse_estimator(const std::string& key, const std::string& v)
{
    const std::string l = lower(v);
    if (l == "ols") return EstimatorSpec::ols();
    if (l == "lasso") return EstimatorSpec::lasso();
    const auto parts = split(l, '-');
    if (parts.size() < 2 || parts.size() > 3 || (parts.size() == 3 && parts[2] != "cf")) {
        throw config_error(key, v, "expected ols, lasso or <selector>-<cols|mle>[-cf]");
    }
    return EstimatorSpec::chain(parse_selector(key, parts[0]), parse_stage2(key, parts[1]), parts.size() == 3);
}

SummaryKind parse_summary(const std::string& key, const std::string& v)
{
    const std::string l = lower(v);
    if (l == "skewness") return SummaryKind::MeanSkewness;
    if (l == "wrong_skew") return SummaryKind::WrongSkewCount;
    if (l == "standardized") return SummaryKind::StandardizedDist;
    if (l == "efficiency") return SummaryKind::MeanEfficiencyDist;
    throw config_error(key, v, "expected skewness, wrong_skew, standardized or efficiency");
}

std::string fmt3(double v)
{
    if (!std::isfinite(v)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    // No negative zero in reports.
    if (std::string(buf) == "-0.000") return "0.000";
    return buf;
}

std::string file_key(const std::string& s)
{
    std::string out;
    for (char ch : lower(s)) out += std::isalnum(static_cast<unsigned char>(ch)) ? ch : '_';
    return out;
}

} // namespace

std::map<std::string, std::string> parse_key_values(std::istream& in)
{
    std::map<std::string, std::string> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::InvalidConfig, "config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(std::string_view(line).substr(0, eq));
        if (key.empty()) throw Error(ErrorCode::InvalidConfig, "config line " + std::to_string(lineno) + ": empty key");
        out[key] = trim(std::string_view(line).substr(eq + 1));
    }
    return out;
}

std::map<std::string, std::string> read_key_value_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open config file '" + path + "'");
    return parse_key_values(in);
}

ColumnRole parse_role(const std::string& s)
{
    const std::string l = lower(trim(s));
    if (l == "output") return ColumnRole::Output;
    if (l == "input") return ColumnRole::Input;
    if (l == "selectable") return ColumnRole::Selectable;
    if (l == "dummy") return ColumnRole::Dummy;
    throw Error(ErrorCode::InvalidConfig, "unknown column role '" + s + "'");
}

const char* to_string(ColumnRole r)
{
    switch (r) {
        case ColumnRole::Output: return "output";
        case ColumnRole::Input: return "input";
        case ColumnRole::Selectable: return "selectable";
        case ColumnRole::Dummy: return "dummy";
    }
    return "?";
}

RunConfig make_config(const std::map<std::string, std::string>& entries)
{
    RunConfig cfg;
    cfg.entries = entries;
    bool grid_n_set = false, grid_c_set = false, estimators_set = false, summaries_set = false, penalty_set = false;

    for (const auto& [key, v] : entries) {
        if (key == "command") {
            const std::string l = lower(v);
            if (l == "estimate") cfg.command = Command::Estimate;
            else if (l == "montecarlo") cfg.command = Command::MonteCarlo;
            else if (l == "ortho") cfg.command = Command::Ortho;
            else throw config_error(key, v, "expected estimate, montecarlo or ortho");
        } else if (key == "input") {
            cfg.input_path = v;
        } else if (key == "schema") {
            cfg.schema_path = v;
        } else if (key.rfind("role.", 0) == 0) {
            cfg.schema.emplace_back(key.substr(5), parse_role(v));
        } else if (key == "output") {
            cfg.spec.output = v;
        } else if (key == "form") {
            const std::string l = lower(v);
            if (l == "cobb-douglas" || l == "cobbdouglas") cfg.spec.form = FunctionalForm::CobbDouglas;
            else if (l == "translog") cfg.spec.form = FunctionalForm::Translog;
            else throw config_error(key, v, "expected cobb-douglas or translog");
        } else if (key == "mandatory") {
            cfg.spec.mandatory = split_list(v);
        } else if (key == "selectable") {
            cfg.spec.selectable = split_list(v);
        } else if (key == "second_order_optional") {
            cfg.spec.second_order_optional = as_bool(key, v);
        } else if (key == "mean_deviate_logs") {
            cfg.spec.mean_deviate_logs = as_bool(key, v);
        } else if (key == "selector") {
            cfg.selector = parse_selector(key, v);
        } else if (key == "method") {
            cfg.stage2 = parse_stage2(key, v);
        } else if (key == "cross_fit") {
            cfg.cross_fit = as_bool(key, v);
        } else if (key == "compare") {
            cfg.compare = as_bool(key, v);
        } else if (key == "penalty") {
            parse_penalty(key, v, cfg.plan);
            penalty_set = true;
        } else if (key == "folds") {
            cfg.plan.folds = static_cast<int>(as_long(key, v));
        } else if (key == "grid_size") {
            cfg.plan.grid_size = static_cast<int>(as_long(key, v));
        } else if (key == "seed") {
            const long s = as_long(key, v);
            if (s < 0) throw config_error(key, v, "seed must be non-negative");
            cfg.seed = static_cast<std::uint64_t>(s);
        } else if (key == "out") {
            cfg.output_path = v;
        } else if (key == "efficiency") {
            const std::string l = lower(v);
            if (l == "conditional-mean") cfg.stage2_options.efficiency = EfficiencyMetric::ConditionalMean;
            else if (l == "conditional-expectation") cfg.stage2_options.efficiency = EfficiencyMetric::ConditionalExpectation;
            else throw config_error(key, v, "expected conditional-mean or conditional-expectation");
        } else if (key == "design") {
            const std::string l = lower(v);
            if (l == "irrelevant") cfg.design = DesignKind::IrrelevantZ;
            else if (l == "belloni") cfg.design = DesignKind::BelloniD1;
            else throw config_error(key, v, "expected irrelevant or belloni");
        } else if (key == "n") {
            cfg.grid_n.clear();
            for (const auto& t : split_list(v)) cfg.grid_n.push_back(static_cast<Index>(as_long(key, t)));
            grid_n_set = true;
        } else if (key == "c") {
            cfg.grid_c.clear();
            for (const auto& t : split_list(v)) cfg.grid_c.push_back(as_double(key, t));
            grid_c_set = true;
        } else if (key == "reps") {
            cfg.reps = static_cast<int>(as_long(key, v));
        } else if (key == "workers") {
            cfg.workers = static_cast<int>(as_long(key, v));
        } else if (key == "estimators") {
            cfg.estimators.clear();
            for (const auto& t : split_list(v)) cfg.estimators.push_back(parse_estimator(key, t));
            estimators_set = true;
        } else if (key == "summaries") {
            cfg.summaries.clear();
            for (const auto& t : split_list(v)) cfg.summaries.push_back(parse_summary(key, t));
            summaries_set = true;
        } else if (key == "rep_level") {
            cfg.write_rep_level = as_bool(key, v);
        } else if (key == "ortho_n") {
            cfg.ortho_n = static_cast<Index>(as_long(key, v));
        } else if (key == "table") {
            // Handled below so that explicit keys still win.
        } else {
            throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
        }
    }

    if (const auto t = entries.find("table"); t != entries.end()) {
        const long table = as_long("table", t->second);
        if (table < 1 || table > 4) throw config_error("table", t->second, "expected 1, 2, 3 or 4");
        if (!estimators_set) cfg.estimators = {table <= 2 ? EstimatorSpec::ols() : EstimatorSpec::lasso()};
        if (!summaries_set) {
            cfg.summaries = {table % 2 == 1 ? SummaryKind::MeanSkewness : SummaryKind::WrongSkewCount};
        }
    }
    if (cfg.design == DesignKind::BelloniD1) {
        if (!grid_n_set) cfg.grid_n = {100};
        if (!grid_c_set) cfg.grid_c = {0.0};
        if (!estimators_set) {
            cfg.estimators = {EstimatorSpec::chain(Selector::PSL, Stage2::Cols), EstimatorSpec::chain(Selector::PDL, Stage2::Cols),
                              EstimatorSpec::chain(Selector::PSL, Stage2::Mle), EstimatorSpec::chain(Selector::PDL, Stage2::Mle)};
        }
        if (!summaries_set) {
            cfg.summaries = {SummaryKind::WrongSkewCount, SummaryKind::StandardizedDist, SummaryKind::MeanEfficiencyDist};
        }
        if (!penalty_set) cfg.plan.rule = PenaltyRule::PlugIn;
    }

    if (cfg.reps < 1) throw config_error("reps", std::to_string(cfg.reps), "must be positive");
    if (cfg.workers < 0) throw config_error("workers", std::to_string(cfg.workers), "must be non-negative");
    if (cfg.plan.folds < 2) throw config_error("folds", std::to_string(cfg.plan.folds), "need at least 2 folds");
    if (cfg.grid_n.empty() || cfg.grid_c.empty()) throw Error(ErrorCode::InvalidConfig, "empty Monte Carlo grid");
    for (Index n : cfg.grid_n) {
        if (n < 10) throw config_error("n", std::to_string(n), "sample sizes must be at least 10");
    }
    for (double c : cfg.grid_c) {
        if (!(c >= 0.0 && c < 1.0)) throw config_error("c", std::to_string(c), "fractions must lie in [0, 1)");
    }
    if (cfg.ortho_n < 1000) throw config_error("ortho_n", std::to_string(cfg.ortho_n), "need at least 1000 draws");
    cfg.plan.seed = cfg.seed;
    return cfg;
}

std::uint64_t config_digest(const std::map<std::string, std::string>& entries)
{
    std::uint64_t h = 14695981039346656037ull;
    auto feed = [&](const std::string& s) {
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 1099511628211ull;
        }
    };
    for (const auto& [k, v] : entries) {
        if (k != "out") feed(k + "=" + v + "\n");
    }
    return h;
}

std::string metadata_header(const RunConfig& cfg)
{
    char buf[128];
    std::snprintf(buf, sizeof buf, "# sfa %s seed=%llu config=%016llx\n", kVersion,
                  static_cast<unsigned long long>(cfg.seed), static_cast<unsigned long long>(config_digest(cfg.entries)));
    return buf;
}

Schema read_schema(std::istream& in)
{
    Schema out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto cells = split(line, ',');
        if (cells.size() != 2) throw Error(ErrorCode::InvalidConfig, "schema line '" + line + "': expected column,role");
        if (first && lower(cells[0]) == "column" && lower(cells[1]) == "role") {
            first = false;
            continue;
        }
        first = false;
        out.emplace_back(unquote(cells[0]), parse_role(cells[1]));
    }
    return out;
}

Schema read_schema_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open schema file '" + path + "'");
    return read_schema(in);
}

RawDataset load_csv(std::istream& in, const Schema& schema)
{
    std::set<std::string> seen;
    int outputs = 0;
    for (const auto& [name, role] : schema) {
        if (!seen.insert(name).second) throw Error(ErrorCode::InvalidConfig, "column '" + name + "' listed twice in the schema");
        if (role == ColumnRole::Output) ++outputs;
    }
    if (outputs != 1) throw Error(ErrorCode::InvalidConfig, "the schema needs exactly one output column");

    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::EmptyData, "no header row");
    std::vector<std::string> header;
    for (auto& h : split(line, ',')) header.push_back(unquote(h));

    // (file column index, schema role) in file order.
    std::vector<std::pair<std::size_t, ColumnRole>> used;
    for (const auto& [name, role] : schema) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw Error(ErrorCode::MissingColumn, "column '" + name + "' not found in the header");
    }
    for (std::size_t j = 0; j < header.size(); ++j) {
        for (const auto& [name, role] : schema) {
            if (header[j] == name) used.emplace_back(j, role);
        }
    }

    std::vector<std::vector<double>> cols(used.size());
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto cells = split(line, ',');
        for (std::size_t u = 0; u < used.size(); ++u) {
            const auto [j, role] = used[u];
            const std::string where = "row " + std::to_string(row) + ", column '" + header[j] + "'";
            if (j >= cells.size() || unquote(cells[j]).empty()) {
                throw Error(ErrorCode::ParseError, where + ": missing value");
            }
            double v = 0.0;
            const std::string cell = unquote(cells[j]);
            if (!parse_double(cell, v) || !std::isfinite(v)) {
                throw Error(ErrorCode::ParseError, where + ": '" + cell + "' is not a number");
            }
            if (role == ColumnRole::Dummy && v != 0.0 && v != 1.0) {
                throw Error(ErrorCode::ParseError, where + ": dummy value '" + cell + "' is not 0 or 1");
            }
            cols[u].push_back(v);
        }
    }
    if (used.empty() || cols.front().empty()) throw Error(ErrorCode::EmptyData, "no data rows");

    RawDataset raw;
    for (std::size_t u = 0; u < used.size(); ++u) {
        RawColumn c;
        c.name = header[used[u].first];
        c.role = used[u].second;
        c.values = Eigen::Map<const VectorXd>(cols[u].data(), static_cast<Index>(cols[u].size()));
        raw.columns.push_back(std::move(c));
    }
    return raw;
}

RawDataset load_csv(const std::string& path, const Schema& schema)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingColumn, "cannot open data file '" + path + "'");
    return load_csv(in, schema);
}

void write_csv(std::ostream& os, const RawDataset& raw)
{
    for (std::size_t j = 0; j < raw.columns.size(); ++j) os << (j ? "," : "") << raw.columns[j].name;
    os << '\n';
    char buf[32];
    for (Index i = 0; i < raw.n(); ++i) {
        for (std::size_t j = 0; j < raw.columns.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", raw.columns[j].values(i));
            os << (j ? "," : "") << buf;
        }
        os << '\n';
    }
}

void write_schema(std::ostream& os, const RawDataset& raw)
{
    os << "column,role\n";
    for (const auto& c : raw.columns) os << c.name << ',' << to_string(c.role) << '\n';
}

FrontierSpec resolve_spec(const FrontierSpec& spec, const RawDataset& raw)
{
    FrontierSpec out = spec;
    const bool fill_mandatory = out.mandatory.empty();
    const bool fill_selectable = out.selectable.empty();
    for (const auto& c : raw.columns) {
        switch (c.role) {
            case ColumnRole::Output:
                if (out.output.empty()) out.output = c.name;
                break;
            case ColumnRole::Input:
                if (fill_mandatory
                    && std::find(out.selectable.begin(), out.selectable.end(), c.name) == out.selectable.end()) {
                    out.mandatory.push_back(c.name);
                }
                break;
            case ColumnRole::Selectable:
            case ColumnRole::Dummy:
                if (fill_selectable) out.selectable.push_back(c.name);
                break;
        }
    }
    if (out.output.empty()) throw Error(ErrorCode::InvalidConfig, "no output column");
    return out;
}

EstimateReport make_report(const FrontierFit& fit, const FrontierSpec& spec, const SelectionResult* selection, Index n,
                           std::uint64_t seed)
{
    EstimateReport r;
    r.method = fit.method;
    for (Index j = 0; j < fit.coefficients.size(); ++j) {
        r.coefficients.push_back({fit.names[static_cast<std::size_t>(j)], fit.coefficients(j), fit.std_errors(j)});
    }
    r.num_mandatory = fit.num_mandatory;
    r.input_terms = fit.input_terms;
    r.rts = returns_to_scale(fit, spec);
    r.mean_efficiency = fit.mean_efficiency;
    r.num_z = static_cast<Index>(fit.support.size());
    r.wrong_skew = fit.wrong_skew;
    r.sigma = fit.sigma;
    r.loglik = fit.loglik;
    if (selection) {
        for (const auto& p : selection->penalty_levels_used) r.penalty_levels.push_back(p.sum_of_squares(n));
    }
    r.seed = seed;
    return r;
}

namespace {

EstimateReport failed_report(const std::string& method, const std::string& what, std::uint64_t seed)
{
    EstimateReport r;
    r.method = method;
    r.error = what;
    r.seed = seed;
    return r;
}

std::uint64_t split_seed(std::uint64_t seed)
{
    return replication_seed(seed, 0, 2);
}

EstimateReport one_column(const Dataset& data, const RunConfig& cfg, Selector s, Stage2 m,
                          const std::optional<SelectionResult>& selection)
{
    if (cfg.cross_fit) {
        const auto cf = cross_fit(data, s, cfg.plan, m, split_seed(cfg.seed), cfg.stage2_options);
        EstimateReport r = make_report(cf.fit, cfg.spec, &cf.selection_a, data.n() / 2, cfg.seed);
        for (const auto& p : cf.selection_b.penalty_levels_used) {
            r.penalty_levels.push_back(p.sum_of_squares(data.n() - data.n() / 2));
        }
        return r;
    }
    return make_report(post_fit(data, *selection, m, cfg.stage2_options), cfg.spec, &*selection, data.n(), cfg.seed);
}

} // namespace

std::vector<EstimateReport> estimate_dataset(const Dataset& data, const RunConfig& cfg)
{
    if (!cfg.compare) {
        std::optional<SelectionResult> sel;
        if (!cfg.cross_fit) sel = select_support(data, cfg.selector, cfg.plan);
        return {one_column(data, cfg, cfg.selector, cfg.stage2, sel)};
    }
    std::vector<EstimateReport> out;
    for (Selector s : {Selector::None, Selector::All, Selector::PSL, Selector::PDL}) {
        std::optional<SelectionResult> sel;
        std::string sel_error;
        if (!cfg.cross_fit) {
            try {
                sel = select_support(data, s, cfg.plan);
            } catch (const Error& e) {
                sel_error = e.what();
            }
        }
        for (Stage2 m : {Stage2::Cols, Stage2::Mle}) {
            const std::string name = method_chain(s, m) + (cfg.cross_fit ? "-CF" : "");
            if (!sel_error.empty()) {
                out.push_back(failed_report(name, sel_error, cfg.seed));
                continue;
            }
            try {
                out.push_back(one_column(data, cfg, s, m, sel));
            } catch (const Error& e) {
                out.push_back(failed_report(name, e.what(), cfg.seed));
            }
        }
    }
    return out;
}

void write_estimate_table(std::ostream& os, const std::vector<EstimateReport>& reports)
{
    // Mandatory block and first-order input terms, in order of first appearance.
    std::vector<std::string> rows;
    for (const auto& r : reports) {
        for (std::size_t j = 0; j < r.coefficients.size(); ++j) {
            const auto& name = r.coefficients[j].name;
            const bool input = std::find(r.input_terms.begin(), r.input_terms.end(), name) != r.input_terms.end();
            if (static_cast<Index>(j) >= r.num_mandatory && !input) continue;
            if (std::find(rows.begin(), rows.end(), name) == rows.end()) rows.push_back(name);
        }
    }
    std::size_t width = 12;
    for (const auto& r : rows) width = std::max(width, r.size() + 2);
    auto pad = [](const std::string& s, std::size_t w) { return s.size() >= w ? s + " " : s + std::string(w - s.size(), ' '); };
    constexpr std::size_t kCol = 14;

    os << pad("", width);
    for (const auto& r : reports) os << pad(r.method, kCol);
    os << '\n';
    for (const auto& name : rows) {
        std::string est_line = pad(name, width), se_line = pad("", width);
        for (const auto& r : reports) {
            const auto it = std::find_if(r.coefficients.begin(), r.coefficients.end(),
                                         [&](const CoefficientRow& c) { return c.name == name; });
            if (!r.error.empty() || it == r.coefficients.end()) {
                est_line += pad("", kCol);
                se_line += pad("", kCol);
            } else {
                est_line += pad(fmt3(it->estimate), kCol);
                se_line += pad("(" + fmt3(it->std_error) + ")", kCol);
            }
        }
        os << est_line << '\n' << se_line << '\n';
    }
    auto summary_row = [&](const std::string& label, auto value) {
        os << pad(label, width);
        for (const auto& r : reports) os << pad(r.error.empty() ? value(r) : std::string("failed"), kCol);
        os << '\n';
    };
    summary_row("sigma_u^2", [](const EstimateReport& r) { return fmt3(r.sigma.sigma_u_sq); });
    summary_row("sigma_v^2", [](const EstimateReport& r) { return fmt3(r.sigma.sigma_v_sq); });
    summary_row("RTS", [](const EstimateReport& r) { return fmt3(r.rts); });
    summary_row("Mean Eff", [](const EstimateReport& r) { return fmt3(r.mean_efficiency); });
    summary_row("Num Z", [](const EstimateReport& r) { return std::to_string(r.num_z); });
    summary_row("Wrong skew", [](const EstimateReport& r) { return std::string(r.wrong_skew ? "yes" : "no"); });
    for (const auto& r : reports) {
        if (!r.error.empty()) os << r.method << ": " << r.error << '\n';
    }
}

void write_estimate_csv(std::ostream& os, const std::vector<EstimateReport>& reports)
{
    os << "method,term,estimate,std_error\n";
    for (const auto& r : reports) {
        if (!r.error.empty()) {
            std::string msg = r.error;
            std::replace(msg.begin(), msg.end(), '"', '\'');
            os << r.method << ",error,\"" << msg << "\",\n";
            continue;
        }
        for (const auto& c : r.coefficients) {
            os << r.method << ",\"" << c.name << "\"," << fmt3(c.estimate) << ',' << fmt3(c.std_error) << '\n';
        }
        os << r.method << ",sigma_u_sq," << fmt3(r.sigma.sigma_u_sq) << ",\n";
        os << r.method << ",sigma_v_sq," << fmt3(r.sigma.sigma_v_sq) << ",\n";
        os << r.method << ",RTS," << fmt3(r.rts) << ",\n";
        os << r.method << ",Mean Eff," << fmt3(r.mean_efficiency) << ",\n";
        os << r.method << ",Num Z," << r.num_z << ",\n";
        os << r.method << ",wrong_skew," << (r.wrong_skew ? 1 : 0) << ",\n";
        for (std::size_t k = 0; k < r.penalty_levels.size(); ++k) {
            os << r.method << ",penalty_" << k << ',' << fmt3(r.penalty_levels[k]) << ",\n";
        }
    }
}

std::string write_output(const RunConfig& cfg, const std::string& name, const std::string& content)
{
    if (cfg.output_path.empty()) return {};
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg.output_path, ec);
    if (ec) throw Error(ErrorCode::InvalidConfig, "cannot create output directory '" + cfg.output_path + "'");
    const std::string path = (fs::path(cfg.output_path) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::InvalidConfig, "cannot write '" + path + "'");
    out << metadata_header(cfg) << content;
    return path;
}

std::vector<EstimateReport> run_estimate(const RunConfig& cfg)
{
    if (cfg.input_path.empty()) throw Error(ErrorCode::InvalidConfig, "estimate needs an input file");
    Schema schema = cfg.schema;
    if (!cfg.schema_path.empty()) {
        const Schema from_file = read_schema_file(cfg.schema_path);
        schema.insert(schema.begin(), from_file.begin(), from_file.end());
    }
    if (schema.empty()) throw Error(ErrorCode::InvalidConfig, "no schema: give schema = <file> or role.<column> keys");
    const RawDataset raw = load_csv(cfg.input_path, schema);
    RunConfig resolved = cfg;
    resolved.spec = resolve_spec(cfg.spec, raw);
    const Dataset data = expand_spec(raw, resolved.spec);
    auto reports = estimate_dataset(data, resolved);

    std::ostringstream table, csv;
    write_estimate_table(table, reports);
    write_estimate_csv(csv, reports);
    write_output(cfg, "estimate.txt", table.str());
    write_output(cfg, "estimate.csv", csv.str());
    return reports;
}

void write_grid_csv(std::ostream& os, const std::vector<CellStats>& cells, const std::vector<Index>& grid_n,
                    const std::vector<double>& grid_c, const std::string& estimator, SummaryKind what)
{
    os << "n";
    for (double c : grid_c) os << ",c=" << c;
    os << '\n';
    for (Index n : grid_n) {
        os << n;
        for (double c : grid_c) {
            McDesign probe;
            probe.n = n;
            probe.c = c;
            const std::string label = probe.cell_label();
            const auto it = std::find_if(cells.begin(), cells.end(), [&](const CellStats& s) {
                return s.cell == label && s.estimator == estimator;
            });
            os << ',';
            if (it == cells.end()) {
                os << "NA";
            } else if (what == SummaryKind::WrongSkewCount) {
                os << it->wrong_skew_count;
            } else {
                os << fmt3(it->mean_skewness);
            }
        }
        os << '\n';
    }
}

MonteCarloOutput run_montecarlo(const RunConfig& cfg)
{
    MonteCarloOutput out;
    out.summary.summaries = cfg.summaries;
    const bool wants_dist = std::find(cfg.summaries.begin(), cfg.summaries.end(), SummaryKind::StandardizedDist)
                            != cfg.summaries.end();
    std::vector<RepRecord> all_reps;
    auto run_cell = [&](Index n, double c) {
        McDesign d;
        d.kind = cfg.design;
        d.n = n;
        d.c = c;
        d.reps = cfg.reps;
        d.base_seed = cfg.seed;
        d.workers = cfg.workers;
        d.estimators = cfg.estimators;
        d.summaries = cfg.summaries;
        d.plan = cfg.plan;
        d.stage2 = cfg.stage2_options;
        d.keep_rep_level = cfg.write_rep_level || wants_dist;
        McSummary s;
        try {
            s = run_design(d);
        } catch (const Error& e) {
            throw Error(e.code(), d.cell_label() + ": " + e.what());
        }
        out.summary.cells.insert(out.summary.cells.end(), s.cells.begin(), s.cells.end());
        all_reps.insert(all_reps.end(), s.rep_level.begin(), s.rep_level.end());
        if (wants_dist && cfg.design == DesignKind::BelloniD1) {
            for (const auto& est : cfg.estimators) {
                if (est.kind != EstimatorSpec::Kind::Frontier) continue;
                std::ostringstream os;
                os << "cell,estimator,parameter,mean,sd,missing_se\n";
                std::ostringstream bins;
                bins << "lower,upper,count\n";
                try {
                    const auto dist = standardized_dist(s.rep_level, est.name, McParam::Beta, d.belloni.beta);
                    os << '"' << d.cell_label() << "\"," << est.name << ",beta," << fmt3(dist.mean) << ','
                       << fmt3(dist.sd) << ',' << dist.missing_se << '\n';
                    for (std::size_t b = 0; b < dist.counts.size(); ++b) {
                        bins << fmt3(dist.edges[b]) << ',' << fmt3(dist.edges[b + 1]) << ',' << dist.counts[b] << '\n';
                    }
                } catch (const Error& e) {
                    os << '"' << d.cell_label() << "\"," << est.name << ",beta,NA,NA," << e.what() << '\n';
                }
                const std::string f = write_output(cfg, "standardized_" + file_key(est.name) + "_n" + std::to_string(n) + ".csv",
                                                   os.str() + bins.str());
                if (!f.empty()) out.files.push_back(f);
            }
        }
    };
    if (cfg.design == DesignKind::BelloniD1) {
        for (Index n : cfg.grid_n) run_cell(n, 0.0);
    } else {
        for (Index n : cfg.grid_n) {
            for (double c : cfg.grid_c) run_cell(n, c);
        }
    }

    std::ostringstream summary;
    write_summary_csv(summary, out.summary);
    if (auto f = write_output(cfg, "summary.csv", summary.str()); !f.empty()) out.files.push_back(f);

    if (cfg.design == DesignKind::IrrelevantZ) {
        for (const auto& est : cfg.estimators) {
            for (SummaryKind k : {SummaryKind::MeanSkewness, SummaryKind::WrongSkewCount}) {
                if (std::find(cfg.summaries.begin(), cfg.summaries.end(), k) == cfg.summaries.end()) continue;
                std::ostringstream g;
                write_grid_csv(g, out.summary.cells, cfg.grid_n, cfg.grid_c, est.name, k);
                const std::string name = "grid_" + file_key(est.name)
                                         + (k == SummaryKind::MeanSkewness ? "_skewness.csv" : "_wrong_skew.csv");
                if (auto f = write_output(cfg, name, g.str()); !f.empty()) out.files.push_back(f);
            }
        }
    }
    if (cfg.write_rep_level) {
        std::ostringstream reps;
        write_rep_csv(reps, all_reps);
        if (auto f = write_output(cfg, "replications.csv", reps.str()); !f.empty()) out.files.push_back(f);
        out.summary.rep_level = std::move(all_reps);
    }
    return out;
}

OrthoOutput run_ortho(const RunConfig& cfg)
{
    OrthoOutput out;
    const OrthoSample s = make_ortho_sample(cfg.ortho_n, replication_seed(cfg.seed, 0, 0));
    std::string text;
    for (MomentId id : {MomentId::A, MomentId::Aprime, MomentId::Adoubleprime, MomentId::Astar_cols,
                        MomentId::Astar_mle, MomentId::Bstar, MomentId::Cstar}) {
        out.reports.push_back(ortho_report(moment_spec(id), s.truth.params(id), s));
        text += to_text(out.reports.back());
    }
    OrthoParams biased = s.truth.params(MomentId::Adoubleprime);
    biased.delta += 0.5;
    out.reports.push_back(ortho_report(moment_spec(MomentId::Adoubleprime), biased, s));
    text += "# A'' with delta shifted by +0.5\n" + to_text(out.reports.back());

    out.rho_demeaned = check_rho_orthogonality(s, s.truth.params(MomentId::Cstar), true);
    text += "# demeaned z\n" + to_text(out.rho_demeaned);
    OrthoDesign shifted;
    shifted.z_mean = 1.0;
    const OrthoSample s1 = make_ortho_sample(cfg.ortho_n, replication_seed(cfg.seed, 1, 0), shifted);
    out.rho_shifted = check_rho_orthogonality(s1, s1.truth.params(MomentId::Cstar), false);
    text += "# z with mean 1\n" + to_text(out.rho_shifted);

    out.homoskewness = homoskewness_probe(s, s.truth.params(MomentId::Cstar));
    char buf[200];
    std::snprintf(buf, sizeof buf, "homoskewness bins %d max relative deviation %.4g max deviation %.3g se %s\n",
                  out.homoskewness.bins, out.homoskewness.max_relative_deviation, out.homoskewness.max_deviation_se,
                  to_string(out.homoskewness.verdict));
    text += buf;
    out.text = text;
    write_output(cfg, "ortho.txt", text);
    return out;
}

int exit_code(ErrorKind k)
{
    switch (k) {
        case ErrorKind::Config: return 2;
        case ErrorKind::Data: return 3;
        case ErrorKind::Numerical: return 4;
    }
    return 1;
}

} // namespace sfa
