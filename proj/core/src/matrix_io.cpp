#include "sflqg/matrix_io.hpp"

#include "sflqg/errors.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace sflqg {

namespace {

// Next line that carries content; false at end of input.
bool next_content_line(std::istream& in, std::string& line) {
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        return true;
    }
    return false;
}

}  // namespace

Matrix read_matrix(std::istream& in) {
    std::string line;
    if (!next_content_line(in, line)) {
        throw ParseError("expected matrix header \"rows cols\", found end of input");
    }
    std::istringstream header(line);
    long rows = -1;
    long cols = -1;
    if (!(header >> rows >> cols) || rows < 0 || cols < 0) {
        throw ParseError("malformed matrix header: \"" + line + "\"");
    }
    std::string extra;
    if (header >> extra) {
        throw ParseError("trailing tokens in matrix header: \"" + line + "\"");
    }
    Matrix m(rows, cols);
    for (long r = 0; r < rows; ++r) {
        if (!next_content_line(in, line)) {
            throw ParseError("matrix ended after " + std::to_string(r) + " of " + std::to_string(rows) + " rows");
        }
        std::istringstream row(line);
        for (long c = 0; c < cols; ++c) {
            double v = 0.0;
            if (!(row >> v)) {
                throw ParseError("row " + std::to_string(r) + " has fewer than " + std::to_string(cols) + " values");
            }
            m(r, c) = v;
        }
        if (row >> extra) {
            throw ParseError("row " + std::to_string(r) + " has more than " + std::to_string(cols) + " values");
        }
    }
    return m;
}

std::vector<Matrix> read_matrices(std::istream& in) {
    std::vector<Matrix> out;
    while (true) {
        // Peek for remaining content without consuming a block header.
        const auto pos = in.tellg();
        std::string line;
        if (!next_content_line(in, line)) {
            break;
        }
        in.clear();
        in.seekg(pos);
        out.push_back(read_matrix(in));
    }
    return out;
}

std::vector<Matrix> read_matrix_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return read_matrices(in);
}

void write_matrix(std::ostream& out, const Matrix& m) {
    const auto flags = out.flags();
    const auto prec = out.precision();
    out << m.rows() << ' ' << m.cols() << '\n';
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            if (c > 0) {
                out << ' ';
            }
            out << m(r, c);
        }
        out << '\n';
    }
    out.flags(flags);
    out.precision(prec);
}

std::string format_matrix(const Matrix& m) {
    std::ostringstream os;
    write_matrix(os, m);
    return os.str();
}

}  // namespace sflqg
