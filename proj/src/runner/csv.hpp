#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "parabolica/errors.hpp"

namespace parabolica::runner {

/// Deterministic CSV writer: fixed column order, shortest-round-trip floats.
class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns) {
        file_ = std::fopen(path.string().c_str(), "wb");
        if (!file_) throw ConfigError("cannot open output file: " + path.string());
        for (std::size_t i = 0; i < columns.size(); ++i)
            std::fprintf(file_, "%s%s", columns[i].c_str(), i + 1 < columns.size() ? "," : "\n");
        width_ = columns.size();
    }
    ~CsvWriter() {
        if (file_) std::fclose(file_);
    }
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    CsvWriter& num(double v) {
        sep();
        std::fprintf(file_, "%.17g", v);
        return *this;
    }
    CsvWriter& integer(long v) {
        sep();
        std::fprintf(file_, "%ld", v);
        return *this;
    }
    CsvWriter& text(const std::string& s) {
        sep();
        std::fprintf(file_, "%s", s.c_str());
        return *this;
    }
    void end_row() {
        std::fprintf(file_, "\n");
        col_ = 0;
    }

  private:
    void sep() {
        if (col_ > 0) std::fprintf(file_, ",");
        ++col_;
    }
    std::FILE* file_ = nullptr;
    std::size_t width_ = 0;
    std::size_t col_ = 0;
};

} // namespace parabolica::runner
