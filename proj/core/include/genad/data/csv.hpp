#pragma once

#include <filesystem>
#include <optional>

#include "genad/data/series_frame.hpp"

namespace genad::data {

/// Label file that accompanies `data_path`: `<stem>.labels.csv` in the same directory.
std::filesystem::path sibling_label_path(const std::filesystem::path& data_path);

/// Reads a `timestamp,<m1>,...,<mN>` file. Rows are sorted by timestamp; empty,
/// `nan` and `NA` cells are forward-filled (leading gaps back-filled). When a
/// label path is given (or, for the single-argument form, the sibling label file
/// exists) labels are joined on timestamp and must cover every row.
///
/// Errors are DataError with the offending line number in the message.
SeriesFrame load_csv(const std::filesystem::path& path);
SeriesFrame load_csv(const std::filesystem::path& path,
                     const std::optional<std::filesystem::path>& label_path);

/// Writes the frame (and, when labelled, its sibling label file) with
/// shortest-round-trip float text, so load_csv(save_csv(f)) reproduces f.
void save_csv(const SeriesFrame& frame, const std::filesystem::path& path);

}  // namespace genad::data
