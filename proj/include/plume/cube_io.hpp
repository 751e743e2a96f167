#pragma once

// Data model for hyperspectral cubes, signatures, masks and score maps, plus
// their on-disk formats.
//
// Cube files come in pairs: `<name>.hdr.json` holds {"m", "n", "p",
// "wavenumbers"} and `<name>.f32` holds m*n*p little-endian 32-bit floats,
// pixel-major (each spectrum contiguous, pixels in row-major order). Masks use
// `<name>.mask.json` + `<name>.u8` (0/255), score maps `<name>.score.json` +
// `<name>.score.f32` (row-major). Values are held in memory as doubles.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace plume {

class HyperCube {
 public:
  HyperCube() = default;
  // `spectra` is p x (rows*cols); column r*cols + c is the spectrum at (r, c).
  HyperCube(std::size_t rows, std::size_t cols, std::vector<double> wavenumbers,
            Eigen::MatrixXd spectra);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t bands() const { return wavenumbers_.size(); }
  std::size_t pixels() const { return rows_ * cols_; }
  const std::vector<double>& wavenumbers() const { return wavenumbers_; }
  const Eigen::MatrixXd& spectra() const { return spectra_; }

  auto spectrum(std::size_t pixel) const { return spectra_.col(static_cast<Eigen::Index>(pixel)); }
  auto spectrum(std::size_t r, std::size_t c) const { return spectrum(r * cols_ + c); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> wavenumbers_;
  Eigen::MatrixXd spectra_;
};

class SignatureSet {
 public:
  SignatureSet() = default;
  // `signatures` is p x N, one signature per column.
  SignatureSet(Eigen::MatrixXd signatures, std::vector<std::string> names,
               std::vector<double> wavenumbers = {});

  std::size_t count() const { return names_.size(); }
  std::size_t bands() const { return static_cast<std::size_t>(signatures_.rows()); }
  const Eigen::MatrixXd& matrix() const { return signatures_; }
  const std::vector<std::string>& names() const { return names_; }
  // Empty when the set was built without a wavenumber axis.
  const std::vector<double>& wavenumbers() const { return wavenumbers_; }

  SignatureSet subset(std::size_t index) const;

 private:
  Eigen::MatrixXd signatures_;
  std::vector<std::string> names_;
  std::vector<double> wavenumbers_;
};

class PlumeMask {
 public:
  PlumeMask() = default;
  PlumeMask(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool at(std::size_t pixel) const { return values_[pixel] != 0; }
  bool at(std::size_t r, std::size_t c) const { return at(r * cols_ + c); }
  std::size_t count() const;
  const std::vector<std::uint8_t>& values() const { return values_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> values_;  // 0 or 1
};

class ScoreMap {
 public:
  ScoreMap() = default;
  ScoreMap(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  double at(std::size_t pixel) const { return values_[pixel]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// Accepts either the base path ("dir/name") or the header path
// ("dir/name.hdr.json").
HyperCube read_cube(const std::filesystem::path& path);
void write_cube(const HyperCube& cube, const std::filesystem::path& path);

// CSV with header `wavenumber,name1[,name2,...]` and one row per band.
SignatureSet read_signatures(const std::filesystem::path& path);
void write_signatures(const SignatureSet& signatures, const std::filesystem::path& path);

ScoreMap read_score_map(const std::filesystem::path& path);
void write_score_map(const ScoreMap& map, const std::filesystem::path& path);

PlumeMask read_mask(const std::filesystem::path& path);
void write_mask(const PlumeMask& mask, const std::filesystem::path& path);

// Low-level payload helpers, exposed for the round-trip tests.
std::vector<std::uint8_t> encode_f32_le(const double* values, std::size_t count);
std::vector<float> decode_f32_le(const std::vector<std::uint8_t>& bytes);

}  // namespace plume
