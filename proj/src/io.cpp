#include "rhem/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

namespace rhem {

std::string format_double(double value)
{
    if (std::isnan(value)) return "NaN";
    if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
    if (ec != std::errc()) throw InvalidInput("cannot format number");
    return std::string(buffer, end);
}

double parse_double(std::string_view text, const std::string& context)
{
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
        throw InvalidInput(context + ": '" + std::string(text) + "' is not a number");
    return value;
}

std::vector<double> parse_double_list(std::string_view text)
{
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        out.push_back(parse_double(text.substr(pos, comma - pos), "number list"));
        pos = comma + 1;
    }
    return out;
}

// CSV ---------------------------------------------------------------------

namespace {

std::vector<std::string> split_record(const std::string& line, const std::string& where)
{
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    if (quoted) throw InvalidInput(where + ": unterminated quote");
    for (auto& f : fields) {
        const auto first = f.find_first_not_of(" \t");
        const auto last = f.find_last_not_of(" \t");
        f = first == std::string::npos ? std::string() : f.substr(first, last - first + 1);
    }
    return fields;
}

std::string quote_if_needed(const std::string& field)
{
    if (field.find_first_of(",\"") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string at_line(const CsvTable& t, std::size_t row) { return "line " + std::to_string(t.line(row)); }

} // namespace

std::size_t CsvTable::column(std::string_view name) const
{
    auto found = find_column(name);
    if (!found) throw InvalidInput("missing column '" + std::string(name) + "'");
    return *found;
}

std::optional<std::size_t> CsvTable::find_column(std::string_view name) const
{
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(std::istream& in, const std::string& source)
{
    CsvTable table;
    std::string line;
    std::size_t number = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (number == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const std::string where = source + " line " + std::to_string(number);
        auto fields = split_record(line, where);
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size())
            throw InvalidInput(where + ": expected " + std::to_string(table.header.size()) + " fields, found " +
                               std::to_string(fields.size()));
        table.rows.push_back(std::move(fields));
        table.lines.push_back(number);
    }
    if (!have_header) throw InvalidInput(source + ": missing header row");
    return table;
}

std::ifstream open_input(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open '" + path + "'");
    return in;
}

std::ofstream open_output(const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write '" + path + "'");
    return out;
}

CsvTable read_csv_file(const std::string& path)
{
    auto in = open_input(path);
    return read_csv(in, path);
}

// Actors ------------------------------------------------------------------

Universe read_actors(std::istream& in)
{
    const CsvTable t = read_csv(in, "actors");
    const std::size_t id = t.column("id");
    const auto gender = t.find_column("gender");
    const auto age = t.find_column("age");
    const auto cls = t.find_column("class");
    std::vector<Actor> actors;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        Actor a;
        a.id = row[id];
        if (a.id.empty()) throw InvalidInput("actors " + at_line(t, i) + ": empty id");
        if (gender && !row[*gender].empty()) {
            const std::string& g = row[*gender];
            if (g == "female" || g == "f" || g == "F") a.gender = Gender::female;
            else if (g == "male" || g == "m" || g == "M") a.gender = Gender::male;
            else throw InvalidInput("actors " + at_line(t, i) + ": unknown gender '" + g + "'");
        }
        if (age && !row[*age].empty()) a.age = parse_double(row[*age], "actors " + at_line(t, i));
        if (cls && !row[*cls].empty()) a.class_id = row[*cls];
        actors.push_back(std::move(a));
    }
    try {
        return Universe(std::move(actors));
    } catch (const InvalidInput& e) {
        throw InvalidInput(std::string("actors: ") + e.what());
    }
}

void write_actors(std::ostream& out, const Universe& universe)
{
    out << "id,gender,age,class\n";
    for (const Actor& a : universe.actors()) {
        out << quote_if_needed(a.id) << ',';
        if (a.gender) out << (*a.gender == Gender::female ? "female" : "male");
        out << ',';
        if (a.age) out << format_double(*a.age);
        out << ',';
        if (a.class_id) out << quote_if_needed(*a.class_id);
        out << '\n';
    }
}

// History -----------------------------------------------------------------

namespace {

std::vector<std::string> split_ids(const std::string& field)
{
    std::vector<std::string> ids;
    std::size_t pos = 0;
    while (pos <= field.size()) {
        const std::size_t semi = std::min(field.find(';', pos), field.size());
        std::string id = field.substr(pos, semi - pos);
        const auto first = id.find_first_not_of(' ');
        const auto last = id.find_last_not_of(' ');
        ids.push_back(first == std::string::npos ? std::string() : id.substr(first, last - first + 1));
        pos = semi + 1;
    }
    return ids;
}

} // namespace

EventHistory read_history(std::istream& in, const Universe& universe)
{
    const CsvTable t = read_csv(in, "history");
    const std::size_t tc = t.column("time");
    const std::size_t sc = t.column("senders");
    const std::size_t rc = t.column("receiver");

    EventHistory history;
    if (universe.empty()) {
        std::set<std::string> ids;
        for (const auto& row : t.rows) {
            for (auto& id : split_ids(row[sc]))
                if (!id.empty()) ids.insert(id);
            if (!row[rc].empty()) ids.insert(row[rc]);
        }
        std::vector<Actor> actors;
        for (const auto& id : ids) actors.push_back({id, std::nullopt, std::nullopt, std::nullopt});
        history.universe = Universe(std::move(actors));
    } else {
        history.universe = universe;
    }

    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::string where = "history " + at_line(t, i);
        Hyperevent e;
        e.time = parse_double(row[tc], where);
        for (const auto& id : split_ids(row[sc])) {
            if (id.empty()) throw InvalidInput(where + ": empty sender id");
            auto idx = history.universe.find(id);
            if (!idx) throw InvalidInput(where + ": unknown actor '" + id + "'");
            e.senders.push_back(*idx);
        }
        std::sort(e.senders.begin(), e.senders.end());
        auto r = history.universe.find(row[rc]);
        if (!r) throw InvalidInput(where + ": unknown actor '" + row[rc] + "'");
        e.receiver = *r;
        history.events.push_back(std::move(e));
    }

    const auto violations = validate_history(history);
    if (!violations.empty()) {
        const auto& v = violations.front();
        throw InvalidInput("history " + at_line(t, v.event_index) + ": " + v.message);
    }
    return history;
}

void write_history(std::ostream& out, const EventHistory& history)
{
    out << "time,senders,receiver\n";
    for (const Hyperevent& e : history.events)
        out << format_double(e.time) << ',' << quote_if_needed(format_senders(history.universe, e.senders)) << ','
            << quote_if_needed(history.universe[e.receiver].id) << '\n';
}

std::vector<Nomination> read_nominations(std::istream& in)
{
    const CsvTable t = read_csv(in, "nominations");
    const std::size_t wc = t.column("wave"), ec = t.column("ego"), ac = t.column("alter"), sc = t.column("score");
    std::vector<Nomination> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::string where = "nominations " + at_line(t, i);
        const double wave = parse_double(row[wc], where);
        const double score = parse_double(row[sc], where);
        if (wave != std::floor(wave) || score != std::floor(score))
            throw InvalidInput(where + ": wave and score must be integers");
        out.push_back({static_cast<int>(wave), row[ec], row[ac], static_cast<int>(score)});
    }
    return out;
}

// Panels ------------------------------------------------------------------

void write_panel(std::ostream& out, const CensoredPanel& panel, bool with_counts)
{
    with_counts = with_counts && panel.has_counts();
    out << "wave,senders,receiver,y,offset";
    if (with_counts) out << ",count";
    for (const auto& name : panel.covariate_names) out << ',' << name;
    for (const auto& [name, _] : panel.factors) out << ',' << name;
    out << '\n';
    for (std::size_t i = 0; i < panel.rows(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out << panel.wave[i] << ',' << quote_if_needed(panel.senders[i]) << ',' << quote_if_needed(panel.receiver[i])
            << ',' << format_double(panel.y(r)) << ',' << format_double(panel.offset(r));
        if (with_counts) out << ',' << format_double(panel.count(r));
        for (Eigen::Index j = 0; j < panel.covariates.cols(); ++j) out << ',' << format_double(panel.covariates(r, j));
        for (const auto& [_, values] : panel.factors) out << ',' << quote_if_needed(values[i]);
        out << '\n';
    }
}

void write_statistics(std::ostream& out, const CensoredPanel& panel)
{
    out << "wave,senders,receiver";
    for (const auto& name : panel.covariate_names) out << ',' << name;
    out << '\n';
    for (std::size_t i = 0; i < panel.rows(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out << panel.wave[i] << ',' << quote_if_needed(panel.senders[i]) << ',' << quote_if_needed(panel.receiver[i]);
        for (Eigen::Index j = 0; j < panel.covariates.cols(); ++j) out << ',' << format_double(panel.covariates(r, j));
        out << '\n';
    }
}

CensoredPanel read_panel(std::istream& in)
{
    const CsvTable t = read_csv(in, "panel");
    const std::size_t wc = t.column("wave"), sc = t.column("senders"), rc = t.column("receiver");
    const std::size_t yc = t.column("y"), oc = t.column("offset");
    const auto cc = t.find_column("count");
    const std::set<std::size_t> fixed{wc, sc, rc, yc, oc};

    auto numeric = [&](std::size_t col) {
        for (const auto& row : t.rows) {
            try {
                parse_double(row[col], "");
            } catch (const InvalidInput&) {
                return false;
            }
        }
        return true;
    };

    std::vector<std::size_t> covariate_cols, factor_cols;
    for (std::size_t j = 0; j < t.header.size(); ++j) {
        if (fixed.count(j) || (cc && j == *cc)) continue;
        if (t.header[j] == "class" || !numeric(j)) factor_cols.push_back(j);
        else covariate_cols.push_back(j);
    }

    CensoredPanel panel;
    const auto n = static_cast<Eigen::Index>(t.rows.size());
    panel.y.resize(n);
    panel.offset.resize(n);
    if (cc) panel.count.resize(n);
    panel.covariates.resize(n, static_cast<Eigen::Index>(covariate_cols.size()));
    for (auto j : covariate_cols) panel.covariate_names.push_back(t.header[j]);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const auto r = static_cast<Eigen::Index>(i);
        const std::string where = "panel " + at_line(t, i);
        const double wave = parse_double(row[wc], where);
        if (wave != std::floor(wave) || wave < 1) throw InvalidInput(where + ": wave must be a positive integer");
        panel.wave.push_back(static_cast<int>(wave));
        panel.senders.push_back(row[sc]);
        panel.receiver.push_back(row[rc]);
        panel.y(r) = parse_double(row[yc], where);
        if (panel.y(r) != 0.0 && panel.y(r) != 1.0) throw InvalidInput(where + ": y must be 0 or 1");
        panel.offset(r) = parse_double(row[oc], where);
        if (!std::isfinite(panel.offset(r))) throw InvalidInput(where + ": offset must be finite");
        if (cc) panel.count(r) = parse_double(row[*cc], where);
        for (std::size_t j = 0; j < covariate_cols.size(); ++j) {
            const double v = parse_double(row[covariate_cols[j]], where);
            if (!std::isfinite(v)) throw InvalidInput(where + ": covariate '" + t.header[covariate_cols[j]] + "' is not finite");
            panel.covariates(r, static_cast<Eigen::Index>(j)) = v;
        }
        for (auto j : factor_cols) panel.factors[t.header[j]].push_back(row[j]);
    }
    return panel;
}

} // namespace rhem
