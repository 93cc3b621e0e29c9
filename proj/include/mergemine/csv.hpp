#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mergemine {

// RFC 4180 field quoting: a cell is quoted when it contains a comma, a
// double quote, or a line break; embedded quotes are doubled. Rows end
// with '\n'.
std::string csv_escape(std::string_view cell);
std::string csv_join_row(const std::vector<std::string>& cells);

// Whole-document reader. Handles quoted cells with embedded commas,
// quotes, and newlines; accepts both LF and CRLF row endings. Throws
// std::runtime_error on an unterminated quote.
std::vector<std::vector<std::string>> csv_parse(std::string_view text);

class csv_writer {
  public:
    explicit csv_writer(std::string path);
    ~csv_writer();
    csv_writer(const csv_writer&) = delete;
    csv_writer& operator=(const csv_writer&) = delete;

    void write_row(const std::vector<std::string>& cells);
    void close();
    std::size_t rows_written() const { return rows_; }

  private:
    std::string path_;
    std::string buffer_;
    std::size_t rows_ = 0;
    bool closed_ = false;
};

}  // namespace mergemine
