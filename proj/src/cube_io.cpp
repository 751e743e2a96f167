#include "plume/cube_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

namespace plume {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string strip_suffix(std::string s, const std::string& suffix) {
  if (s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0)
    s.erase(s.size() - suffix.size());
  return s;
}

fs::path with_suffix(const fs::path& base, const std::string& suffix) {
  return fs::path(base.string() + suffix);
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed header " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::size_t positive_count(const json& header, const char* key, const fs::path& path) {
  if (!header.contains(key) || !header[key].is_number_integer() || header[key].get<long long>() <= 0)
    throw std::runtime_error(path.string() + ": header field '" + key + "' must be a positive integer");
  return header[key].get<std::size_t>();
}

}  // namespace

HyperCube::HyperCube(std::size_t rows, std::size_t cols, std::vector<double> wavenumbers,
                     Eigen::MatrixXd spectra)
    : rows_(rows), cols_(cols), wavenumbers_(std::move(wavenumbers)), spectra_(std::move(spectra)) {
  if (rows_ == 0 || cols_ == 0 || wavenumbers_.empty())
    throw std::invalid_argument("cube dimensions must be positive");
  if (static_cast<std::size_t>(spectra_.rows()) != wavenumbers_.size() ||
      static_cast<std::size_t>(spectra_.cols()) != rows_ * cols_)
    throw std::invalid_argument("cube payload does not match m x n x p");
  for (std::size_t i = 1; i < wavenumbers_.size(); ++i)
    if (!(wavenumbers_[i] > wavenumbers_[i - 1]))
      throw std::invalid_argument("wavenumbers must be strictly increasing");
  if (!spectra_.allFinite()) throw std::invalid_argument("cube contains non-finite radiance");
}

SignatureSet::SignatureSet(Eigen::MatrixXd signatures, std::vector<std::string> names,
                           std::vector<double> wavenumbers)
    : signatures_(std::move(signatures)), names_(std::move(names)), wavenumbers_(std::move(wavenumbers)) {
  if (signatures_.cols() == 0 || signatures_.rows() == 0)
    throw std::invalid_argument("signature set needs at least one signature");
  if (static_cast<std::size_t>(signatures_.cols()) != names_.size())
    throw std::invalid_argument("signature count does not match name count");
  if (!wavenumbers_.empty() && wavenumbers_.size() != static_cast<std::size_t>(signatures_.rows()))
    throw std::invalid_argument("signature wavenumber axis has the wrong length");
  if (!signatures_.allFinite()) throw std::invalid_argument("signature contains non-finite values");
  for (Eigen::Index j = 0; j < signatures_.cols(); ++j)
    if (signatures_.col(j).squaredNorm() == 0.0)
      throw std::invalid_argument("signature '" + names_[j] + "' is identically zero");
}

SignatureSet SignatureSet::subset(std::size_t index) const {
  if (index >= count()) throw std::out_of_range("signature index out of range");
  return SignatureSet(signatures_.col(static_cast<Eigen::Index>(index)), {names_[index]}, wavenumbers_);
}

PlumeMask::PlumeMask(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) throw std::invalid_argument("mask size does not match m x n");
  for (auto& v : values_) v = v != 0 ? 1 : 0;
}

std::size_t PlumeMask::count() const {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

ScoreMap::ScoreMap(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) throw std::invalid_argument("score map size does not match m x n");
  for (double v : values_)
    if (!std::isfinite(v)) throw std::invalid_argument("score map contains non-finite values");
}

std::vector<std::uint8_t> encode_f32_le(const double* values, std::size_t count) {
  std::vector<std::uint8_t> bytes(count * 4);
  for (std::size_t i = 0; i < count; ++i) {
    // Byte-wise shifts emit little-endian order on any host.
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  return bytes;
}

std::vector<float> decode_f32_le(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() % 4 != 0) throw std::runtime_error("payload length is not a multiple of 4");
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

HyperCube read_cube(const fs::path& path) {
  const fs::path base = strip_suffix(strip_suffix(path.string(), ".hdr.json"), ".f32");
  const fs::path hdr_path = with_suffix(base, ".hdr.json");
  const fs::path raw_path = with_suffix(base, ".f32");
  if (!fs::exists(hdr_path)) throw std::runtime_error("missing cube header " + hdr_path.string());
  if (!fs::exists(raw_path)) throw std::runtime_error("missing cube payload " + raw_path.string());

  const json header = read_json(hdr_path);
  const std::size_t m = positive_count(header, "m", hdr_path);
  const std::size_t n = positive_count(header, "n", hdr_path);
  const std::size_t p = positive_count(header, "p", hdr_path);

  std::vector<double> wavenumbers;
  if (header.contains("wavenumbers")) {
    wavenumbers = header["wavenumbers"].get<std::vector<double>>();
    if (wavenumbers.size() != p)
      throw std::runtime_error(hdr_path.string() + ": wavenumbers length differs from p");
    for (std::size_t i = 1; i < p; ++i)
      if (!(wavenumbers[i] > wavenumbers[i - 1]))
        throw std::runtime_error(hdr_path.string() + ": wavenumbers not strictly increasing");
  } else {
    wavenumbers.resize(p);
    for (std::size_t i = 0; i < p; ++i) wavenumbers[i] = static_cast<double>(i + 1);
  }

  const auto bytes = read_bytes(raw_path);
  if (bytes.size() != m * n * p * 4)
    throw std::runtime_error(raw_path.string() + ": payload holds " + std::to_string(bytes.size()) +
                             " bytes, header implies " + std::to_string(m * n * p * 4));
  const auto floats = decode_f32_le(bytes);
  Eigen::MatrixXd spectra(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(m * n));
  for (std::size_t i = 0; i < floats.size(); ++i) {
    if (!std::isfinite(floats[i])) throw std::runtime_error(raw_path.string() + ": non-finite radiance");
    spectra.data()[i] = static_cast<double>(floats[i]);
  }
  return HyperCube(m, n, std::move(wavenumbers), std::move(spectra));
}

void write_cube(const HyperCube& cube, const fs::path& path) {
  const fs::path base = strip_suffix(path.string(), ".hdr.json");
  json header = {{"m", cube.rows()},
                 {"n", cube.cols()},
                 {"p", cube.bands()},
                 {"wavenumbers", cube.wavenumbers()},
                 {"dtype", "float32"},
                 {"byte_order", "little"},
                 {"layout", "pixel-major"}};
  write_json(with_suffix(base, ".hdr.json"), header);
  write_bytes(with_suffix(base, ".f32"),
              encode_f32_le(cube.spectra().data(), static_cast<std::size_t>(cube.spectra().size())));
}

SignatureSet read_signatures(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());

  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell.erase(0, cell.find_first_not_of(" \t\r"));
      cell.erase(cell.find_last_not_of(" \t\r") + 1);
      cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty signature file");
  const auto header = split(line);
  if (header.size() < 2) throw std::runtime_error(path.string() + ": no signature columns");
  const std::vector<std::string> names(header.begin() + 1, header.end());

  std::vector<double> wavenumbers;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": ragged row");
    std::vector<double> values;
    for (const auto& cell : cells) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (cell.empty() || used != cell.size() || !std::isfinite(v))
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": non-numeric cell '" +
                                 cell + "'");
      values.push_back(v);
    }
    wavenumbers.push_back(values[0]);
    rows.emplace_back(values.begin() + 1, values.end());
  }
  if (rows.empty()) throw std::runtime_error(path.string() + ": no data rows");

  Eigen::MatrixXd sig(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < names.size(); ++j) sig(i, j) = rows[i][j];
  return SignatureSet(std::move(sig), names, std::move(wavenumbers));
}

void write_signatures(const SignatureSet& signatures, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "wavenumber";
  for (const auto& name : signatures.names()) out << ',' << name;
  out << '\n';
  out.precision(17);
  const auto& m = signatures.matrix();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const auto& wn = signatures.wavenumbers();
    out << (wn.empty() ? static_cast<double>(i + 1) : wn[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << m(i, j);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

ScoreMap read_score_map(const fs::path& path) {
  const fs::path base = strip_suffix(strip_suffix(path.string(), ".score.json"), ".score.f32");
  const fs::path hdr_path = with_suffix(base, ".score.json");
  const json header = read_json(hdr_path);
  const std::size_t m = positive_count(header, "m", hdr_path);
  const std::size_t n = positive_count(header, "n", hdr_path);
  const auto floats = decode_f32_le(read_bytes(with_suffix(base, ".score.f32")));
  if (floats.size() != m * n)
    throw std::runtime_error(hdr_path.string() + ": header m*n = " + std::to_string(m * n) +
                             " but payload holds " + std::to_string(floats.size()) + " values");
  return ScoreMap(m, n, std::vector<double>(floats.begin(), floats.end()));
}

void write_score_map(const ScoreMap& map, const fs::path& path) {
  const fs::path base = strip_suffix(path.string(), ".score.json");
  write_json(with_suffix(base, ".score.json"), {{"m", map.rows()}, {"n", map.cols()}, {"dtype", "float32"}});
  write_bytes(with_suffix(base, ".score.f32"), encode_f32_le(map.values().data(), map.size()));
}

PlumeMask read_mask(const fs::path& path) {
  const fs::path base = strip_suffix(strip_suffix(path.string(), ".mask.json"), ".u8");
  const fs::path hdr_path = with_suffix(base, ".mask.json");
  const json header = read_json(hdr_path);
  const std::size_t m = positive_count(header, "m", hdr_path);
  const std::size_t n = positive_count(header, "n", hdr_path);
  auto bytes = read_bytes(with_suffix(base, ".u8"));
  if (bytes.size() != m * n)
    throw std::runtime_error(hdr_path.string() + ": mask payload size does not match m x n");
  return PlumeMask(m, n, std::move(bytes));
}

void write_mask(const PlumeMask& mask, const fs::path& path) {
  const fs::path base = strip_suffix(path.string(), ".mask.json");
  write_json(with_suffix(base, ".mask.json"), {{"m", mask.rows()}, {"n", mask.cols()}});
  std::vector<std::uint8_t> bytes(mask.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.at(i) ? 255 : 0;
  write_bytes(with_suffix(base, ".u8"), bytes);
}

}  // namespace plume
