#ifndef RHEM_IO_HPP
#define RHEM_IO_HPP

#include "rhem/censor.hpp"
#include "rhem/core.hpp"

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace rhem {

/// Shortest text that reads back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text, const std::string& context);
std::vector<double> parse_double_list(std::string_view comma_separated);

/*
 * Minimal CSV table: header plus rows of raw fields. Fields are split on
 * commas; a field may be double-quoted to carry commas. `line(i)` is the
 * 1-based file line of row i, for error messages.
 */
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;

    /// Throws InvalidInput when the column is absent.
    std::size_t column(std::string_view name) const;
    std::optional<std::size_t> find_column(std::string_view name) const;
    std::size_t line(std::size_t row) const { return lines[row]; }
};

CsvTable read_csv(std::istream& in, const std::string& source = "input");
CsvTable read_csv_file(const std::string& path);

/// `id,gender,age,class`; gender is female/male or empty, age and class may
/// be empty.
Universe read_actors(std::istream& in);
void write_actors(std::ostream& out, const Universe& universe);

/// `time,senders,receiver`, senders `;`-separated. With an empty universe
/// the actors are taken from the ids in the file (no attributes).
EventHistory read_history(std::istream& in, const Universe& universe = {});
void write_history(std::ostream& out, const EventHistory& history);

/// `wave,ego,alter,score`
std::vector<Nomination> read_nominations(std::istream& in);

/// `wave,senders,receiver,y,offset[,count],<covariates>[,<factors>]`
void write_panel(std::ostream& out, const CensoredPanel& panel, bool with_counts = false);
/// Numeric columns after `offset` become covariates, except `count`, which
/// restores the uncensored counts; `class` and non-numeric columns become
/// factors.
CensoredPanel read_panel(std::istream& in);

/// `wave,senders,receiver,<covariates>`
void write_statistics(std::ostream& out, const CensoredPanel& panel);

std::ifstream open_input(const std::string& path);
std::ofstream open_output(const std::string& path);

} // namespace rhem

#endif
