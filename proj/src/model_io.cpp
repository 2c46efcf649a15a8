#include "viap/model_io.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "internal/binary_io.hpp"

namespace viap {

namespace detail {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("io", "short write to " + path);
}

}  // namespace detail

namespace {

void write_record(detail::ByteWriter& w, std::string_view name, const Tensor& t) {
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
  w.raw(name);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
  for (std::size_t e : t.shape()) w.uint<std::uint64_t>(e);
  w.f64s(t.data());
}

}  // namespace

std::string encode_params(const ModelParams& params) {
  params.validate();
  detail::ByteWriter w;
  w.raw(kModelMagic);
  const Architecture& a = params.arch;
  write_record(w, "arch",
               Tensor({4}, {static_cast<double>(a.height), static_cast<double>(a.width),
                            static_cast<double>(a.channels), static_cast<double>(a.classes)}));
  const auto fields = params.fields();
  for (std::size_t i = 0; i < fields.size(); ++i) write_record(w, ModelParams::kFieldNames[i], *fields[i]);
  return w.take();
}

ModelParams decode_params(std::string_view bytes) {
  detail::ByteReader r(bytes, "model file");
  if (r.raw(kModelMagic.size()) != kModelMagic) r.fail("bad magic");
  std::map<std::string, Tensor, std::less<>> records;
  while (!r.done()) {
    const auto name_len = r.uint<std::uint32_t>();
    std::string name(r.raw(name_len));
    const auto rank = r.uint<std::uint32_t>();
    if (rank > 8) r.fail("implausible rank for " + name);
    Shape shape(rank);
    for (auto& e : shape) e = r.uint<std::uint64_t>();
    const std::size_t n = shape_size(shape);
    Tensor t(shape, r.f64s(n));
    if (!records.emplace(name, std::move(t)).second) r.fail("duplicate record " + name);
  }
  const auto arch_it = records.find("arch");
  if (arch_it == records.end() || arch_it->second.size() != 4) r.fail("missing arch record");
  Architecture arch;
  std::size_t* dims[] = {&arch.height, &arch.width, &arch.channels, &arch.classes};
  for (std::size_t i = 0; i < 4; ++i) {
    const double v = arch_it->second[i];
    if (!(v >= 1.0 && v <= 1e6 && std::floor(v) == v)) r.fail("bad arch value");
    *dims[i] = static_cast<std::size_t>(v);
  }
  ModelParams p = ModelParams::zeros(arch);
  auto fields = p.fields();
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const auto it = records.find(ModelParams::kFieldNames[i]);
    if (it == records.end()) r.fail("missing record " + std::string(ModelParams::kFieldNames[i]));
    *fields[i] = std::move(it->second);
  }
  if (records.size() != fields.size() + 1) r.fail("unexpected extra records");
  p.validate();
  return p;
}

void save_params(const ModelParams& params, const std::string& path) {
  detail::write_file(path, encode_params(params));
}

ModelParams load_params(const std::string& path) { return decode_params(detail::read_file(path)); }

}  // namespace viap
