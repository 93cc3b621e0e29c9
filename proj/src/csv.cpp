#include "mergemine/csv.hpp"

#include "mergemine/text_util.hpp"

#include <stdexcept>

namespace mergemine {

std::string csv_escape(std::string_view cell) {
    bool needs_quote = cell.find_first_of(",\"\r\n") != std::string_view::npos;
    if (!needs_quote) {
        return std::string(cell);
    }
    std::string out;
    out.reserve(cell.size() + 2);
    out.push_back('"');
    for (char c : cell) {
        if (c == '"') {
            out.push_back('"');
        }
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string csv_join_row(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) {
            out.push_back(',');
        }
        out += csv_escape(cells[i]);
    }
    out.push_back('\n');
    return out;
}

std::vector<std::vector<std::string>> csv_parse(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool in_quotes = false;
    bool cell_started = false;
    std::size_t i = 0;

    auto end_cell = [&] {
        row.push_back(std::move(cell));
        cell.clear();
        cell_started = false;
    };
    auto end_row = [&] {
        end_cell();
        rows.push_back(std::move(row));
        row.clear();
    };

    while (i < text.size()) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell.push_back('"');
                    i += 2;
                } else {
                    in_quotes = false;
                    ++i;
                }
            } else {
                cell.push_back(c);
                ++i;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!cell_started && cell.empty()) {
                    in_quotes = true;
                    cell_started = true;
                } else {
                    cell.push_back('"');
                }
                ++i;
                break;
            case ',':
                end_cell();
                ++i;
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') {
                    end_row();
                    i += 2;
                } else {
                    cell.push_back(c);
                    ++i;
                }
                break;
            case '\n':
                end_row();
                ++i;
                break;
            default:
                cell_started = true;
                cell.push_back(c);
                ++i;
                break;
        }
    }
    if (in_quotes) {
        throw std::runtime_error("csv: unterminated quoted cell at end of input");
    }
    if (cell_started || !cell.empty() || !row.empty()) {
        end_row();
    }
    return rows;
}

csv_writer::csv_writer(std::string path) : path_(std::move(path)) {}

csv_writer::~csv_writer() {
    if (!closed_) {
        try {
            close();
        } catch (...) {
        }
    }
}

void csv_writer::write_row(const std::vector<std::string>& cells) {
    buffer_ += csv_join_row(cells);
    ++rows_;
}

void csv_writer::close() {
    if (closed_) {
        return;
    }
    write_file_bytes(path_, buffer_);
    closed_ = true;
}

}  // namespace mergemine
