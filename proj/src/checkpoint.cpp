#include "mint/checkpoint.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mint {

using nlohmann::json;

namespace {
constexpr char kMagic[] = "MINTCKPT1";
}

void save_params(const ParamStore& store, const std::string& path) {
  json header = json::array();
  for (const auto& [name, m] : store.values)
    header.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  std::string hs = header.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << kMagic << "\n" << hs << "\n";
  for (const auto& [name, m] : store.values)
    for (long j = 0; j < m.cols(); ++j)
      for (long i = 0; i < m.rows(); ++i) {
        double v = m(i, j);
        f.write(reinterpret_cast<const char*>(&v), sizeof(double));
      }
}

void load_params(ParamStore& store, const std::string& path, bool extend) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::string magic, hs;
  std::getline(f, magic);
  if (magic != kMagic) throw std::runtime_error("bad checkpoint: " + path);
  std::getline(f, hs);
  json header = json::parse(hs);

  for (const json& t : header) {
    std::string name = t.at("name").get<std::string>();
    long rows = t.at("rows").get<long>();
    long cols = t.at("cols").get<long>();
    Mat m(rows, cols);
    for (long j = 0; j < cols; ++j)
      for (long i = 0; i < rows; ++i) {
        double v;
        f.read(reinterpret_cast<char*>(&v), sizeof(double));
        m(i, j) = v;
      }
    if (!f) throw std::runtime_error("truncated checkpoint: " + path);
    if (store.has(name)) {
      Mat& dst = store.values.at(name);
      if (dst.rows() != rows || dst.cols() != cols)
        throw std::runtime_error("mismatched tensor: " + name);
      dst = m;
    } else if (extend) {
      store.add(name, m);
    } else {
      throw std::runtime_error("mismatched tensor: " + name);
    }
  }
}

uint64_t hash_params(const ParamStore& store) {
  uint64_t h = 14695981039346656037ULL;
  auto mix = [&h](const void* data, size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [name, m] : store.values) {
    mix(name.data(), name.size());
    for (long j = 0; j < m.cols(); ++j)
      for (long i = 0; i < m.rows(); ++i) {
        double v = m(i, j);
        mix(&v, sizeof(double));
      }
  }
  return h;
}

std::string hash_params_hex(const ParamStore& store) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << hash_params(store);
  return ss.str();
}

}  // namespace mint
