#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmf/surface.hpp"

namespace kmf {

// columnar text format: one "index value" row per node, full precision
inline void save_field_text(const std::filesystem::path& path, const Eigen::VectorXd& v) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) out << i << " " << v[i] << "\n";
}

inline Eigen::VectorXd load_field_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<double> vals;
  long idx;
  double val;
  while (in >> idx >> val) vals.push_back(val);
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

// binary dump: magic, surface kind and grid shape, then raw doubles;
// round-trips bit-exactly
inline void save_field_binary(const std::filesystem::path& path, const SurfacePtr& s,
                              const Eigen::VectorXd& v) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  const char magic[4] = {'K', 'M', 'F', '1'};
  out.write(magic, 4);
  const std::uint32_t kind = s->kind == SurfaceKind::sphere ? 0 : 1;
  std::uint32_t dims[2];
  double tau[2] = {0.0, 0.0};
  if (s->kind == SurfaceKind::sphere) {
    dims[0] = static_cast<std::uint32_t>(s->n_theta);
    dims[1] = static_cast<std::uint32_t>(s->n_phi);
  } else {
    dims[0] = static_cast<std::uint32_t>(s->n);
    dims[1] = 0;
    tau[0] = s->tau.real();
    tau[1] = s->tau.imag();
  }
  const std::uint64_t count = static_cast<std::uint64_t>(v.size());
  out.write(reinterpret_cast<const char*>(&kind), sizeof kind);
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  out.write(reinterpret_cast<const char*>(tau), sizeof tau);
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(count * 8));
}

struct BinaryFieldHeader {
  SurfaceKind kind;
  int dim0 = 0, dim1 = 0;
  std::complex<double> tau;
};

inline Eigen::VectorXd load_field_binary(const std::filesystem::path& path,
                                         BinaryFieldHeader* header = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (std::memcmp(magic, "KMF1", 4) != 0)
    throw std::runtime_error("bad magic in " + path.string());
  std::uint32_t kind, dims[2];
  double tau[2];
  std::uint64_t count;
  in.read(reinterpret_cast<char*>(&kind), sizeof kind);
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  in.read(reinterpret_cast<char*>(tau), sizeof tau);
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  Eigen::VectorXd v(static_cast<Eigen::Index>(count));
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * 8));
  if (!in) throw std::runtime_error("truncated field file " + path.string());
  if (header) {
    header->kind = kind == 0 ? SurfaceKind::sphere : SurfaceKind::torus;
    header->dim0 = static_cast<int>(dims[0]);
    header->dim1 = static_cast<int>(dims[1]);
    header->tau = {tau[0], tau[1]};
  }
  return v;
}

// CSV with a header row, comma separated, full double precision
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path.string());
    out_ << std::setprecision(17);
    for (size_t i = 0; i < header.size(); ++i)
      out_ << header[i] << (i + 1 < header.size() ? "," : "\n");
  }

  template <typename... Ts>
  void row(const Ts&... fields) {
    bool first = true;
    ((out_ << (first ? (first = false, "") : ",") << fields), ...);
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

}  // namespace kmf
