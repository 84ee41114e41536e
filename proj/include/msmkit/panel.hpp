#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace msmkit {

// Number of measurement occasions (k = 0, 1, 2).
inline constexpr int kOccasions = 3;

// Longitudinal panel: baseline risk factor V, per-occasion confounders
// L1 (binary) and L2 (continuous), absorbing treatment A, end-of-follow-up
// outcome Y, and per-cell observed flags. Columnar storage, immutable by
// convention after construction.
struct PanelDataset {
  std::vector<double> v;
  std::array<std::vector<double>, kOccasions> l1;  // 0/1 stored as double
  std::array<std::vector<double>, kOccasions> l2;
  std::array<std::vector<std::uint8_t>, kOccasions> a;
  std::vector<double> y;

  std::array<std::vector<std::uint8_t>, kOccasions> l1_obs;
  std::array<std::vector<std::uint8_t>, kOccasions> l2_obs;
  std::array<std::vector<std::uint8_t>, kOccasions> a_obs;
  std::vector<std::uint8_t> y_obs;

  // Differential-mechanism masks are drawn during generation and applied
  // later by apply_missingness; absent for every other mechanism.
  struct PendingMask {
    std::array<std::vector<std::uint8_t>, kOccasions> miss_l1;
    std::array<std::vector<std::uint8_t>, kOccasions> miss_l2;
  };
  std::shared_ptr<const PendingMask> pending_mask;

  std::size_t size() const { return v.size(); }
  void resize(std::size_t n);
};

enum class MissPattern { BothObserved, L1Missing, L2Missing, BothMissing };

const char* to_string(MissPattern p);

// Missingness pattern of one subject at occasion k (k must be 1 or 2).
MissPattern pattern_of(const PanelDataset& data, std::size_t subject, int k);

// True iff every L, A and Y cell is observed at every occasion.
std::vector<std::uint8_t> complete_case_mask(const PanelDataset& data);

// Row subset (bootstrap resamples and complete-case filters).
PanelDataset subset(const PanelDataset& data, const std::vector<int>& indices);

enum class Validation {
  Strict,      // simulated data: A and Y must be fully observed
  Permissive,  // applied data: missing A or Y cells allowed
};

// Throws ValidationError on out-of-range binaries, non-absorbing treatment,
// internal size inconsistencies or (strict mode) missing A/Y/baseline cells.
void validate_panel(const PanelDataset& data, Validation level);

struct CsvSchema {
  std::string id = "id";
  std::string v = "V";
  std::array<std::string, kOccasions> l1 = {"L1_0", "L1_1", "L1_2"};
  std::array<std::string, kOccasions> l2 = {"L2_0", "L2_1", "L2_2"};
  std::array<std::string, kOccasions> a = {"A_0", "A_1", "A_2"};
  std::string y = "Y";
};

// Wide CSV, one row per subject; empty cells or the literal "NA" mark
// missing values.
PanelDataset load_panel_csv(std::istream& in, Validation level = Validation::Permissive,
                            const CsvSchema& schema = {});
PanelDataset load_panel_csv_file(const std::string& path,
                                 Validation level = Validation::Permissive,
                                 const CsvSchema& schema = {});

void write_panel_csv(const PanelDataset& data, std::ostream& out,
                     const CsvSchema& schema = {});
void write_panel_csv_file(const PanelDataset& data, const std::string& path,
                          const CsvSchema& schema = {});

}  // namespace msmkit
