#include "ictn/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "ictn/wav.hpp"

namespace ictn {

namespace {

constexpr char kMagic[4] = {'I', 'C', 'T', 'N'};
constexpr unsigned char kVersion = 1;

void fail(const std::string& message) { throw std::runtime_error(message); }

void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& b, double v) {
  std::uint64_t word;
  std::memcpy(&word, &v, sizeof word);
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((word >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& bytes;
  std::size_t at = 0;
  const std::string where;

  void need(std::size_t n) const {
    if (at + n > bytes.size()) fail(where + ": truncated checkpoint");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<unsigned char>(bytes[at++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
    at += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
    at += 8;
    double d;
    std::memcpy(&d, &v, sizeof d);
    return d;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes.substr(at, n);
    at += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<Parameter>& params) {
  std::vector<const Parameter*> ordered;
  ordered.reserve(params.size());
  for (const auto& p : params) ordered.push_back(&p);
  std::sort(ordered.begin(), ordered.end(),
            [](const Parameter* a, const Parameter* b) { return a->name < b->name; });

  std::string out;
  out.append(kMagic, 4);
  out.push_back(static_cast<char>(kVersion));
  for (const Parameter* p : ordered) {
    put_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out += p->name;
    const Shape& shape = p->tensor.shape();
    out.push_back(static_cast<char>(shape.size()));
    for (auto e : shape) put_u32(out, static_cast<std::uint32_t>(e));
    const double* values = p->tensor.data();
    for (std::int64_t i = 0; i < p->tensor.size(); ++i) put_f64(out, values[i]);
  }
  write_file_atomic(path, out);
}

std::vector<std::pair<std::string, Tensor>> load_checkpoint(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Reader r{bytes, 0, path.string()};
  if (r.str(4) != std::string(kMagic, 4)) fail(path.string() + ": not an ICTN checkpoint");
  const std::uint8_t version = r.u8();
  if (version != kVersion)
    fail(path.string() + ": unsupported checkpoint version " + std::to_string(version));

  std::vector<std::pair<std::string, Tensor>> entries;
  while (r.at < bytes.size()) {
    const std::uint32_t name_len = r.u32();
    std::string name = r.str(name_len);
    const std::uint8_t rank = r.u8();
    Shape shape(rank);
    std::int64_t count = 1;
    for (auto& e : shape) {
      e = r.u32();
      count *= e;
    }
    std::vector<double> values(static_cast<std::size_t>(count));
    for (auto& v : values) v = r.f64();
    entries.emplace_back(std::move(name), Tensor::from_data(std::move(shape), std::move(values)));
  }
  return entries;
}

void restore_parameters(std::vector<Parameter>& params, const std::filesystem::path& path) {
  auto entries = load_checkpoint(path);
  std::map<std::string, Tensor> by_name;
  for (auto& [name, tensor] : entries) {
    if (!by_name.emplace(name, tensor).second)
      fail(path.string() + ": duplicate parameter " + name);
  }
  if (by_name.size() != params.size())
    fail(path.string() + ": checkpoint holds " + std::to_string(by_name.size()) +
         " parameters, model has " + std::to_string(params.size()));
  for (auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) fail(path.string() + ": missing parameter " + p.name);
    if (it->second.shape() != p.tensor.shape())
      fail(path.string() + ": parameter " + p.name + " has shape " +
           shape_str(it->second.shape()) + ", model expects " + shape_str(p.tensor.shape()));
    std::copy(it->second.data(), it->second.data() + it->second.size(), p.tensor.data());
  }
}

}  // namespace ictn
