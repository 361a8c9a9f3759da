#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace lpal {

// Compressed sparse row matrix, square, column indices sorted within each row.
struct CsrMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::uint32_t> col;
  std::vector<double> val;

  std::size_t nnz() const noexcept { return col.size(); }

  // Stored entry (r, c), or 0 when absent.
  double at(std::size_t r, std::size_t c) const;

  // Exact structural and value symmetry of the stored form.
  bool is_symmetric() const;

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;
};

}  // namespace lpal
