#pragma once

#include "drmel/model.hpp"

#include <cstdint>
#include <string>

namespace drmel {

// 28 HPLC (group 0) and 28 RIA (group 1) cyclosporine measurements from two
// independent halves of the 56 assay pairs.
TwoSampleData cyclosporine_split();

// FNV-1a over group labels and values printed with %.17g.
std::uint64_t data_digest(const TwoSampleData& data);
inline constexpr std::uint64_t kCyclosporineDigest = 0x4fe0f1510ac33d9bULL;

// Header required; a column named `group` holding 0/1 plus numeric columns.
TwoSampleData load_csv(const std::string& path);
TwoSampleData parse_csv(const std::string& text);
void write_csv(const TwoSampleData& data, const std::string& path,
               const std::vector<std::string>& names = {});

}  // namespace drmel
