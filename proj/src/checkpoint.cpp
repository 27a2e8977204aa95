#include "skgc/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <unordered_set>

namespace skgc {

namespace {
template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string32(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_string64(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  Reader(std::istream& in, std::uint64_t size) : in_(in), remaining_(size) {}

  template <class T>
  T get() {
    T v{};
    take(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
  }

  std::string string(std::uint64_t len) {
    if (len > remaining_) throw CheckpointError("corrupt checkpoint: truncated string");
    std::string s(len, '\0');
    take(s.data(), len);
    return s;
  }

  void take(char* dst, std::uint64_t n) {
    if (n > remaining_) throw CheckpointError("corrupt checkpoint: truncated");
    in_.read(dst, static_cast<std::streamsize>(n));
    if (!in_) throw CheckpointError("corrupt checkpoint: read failure");
    remaining_ -= n;
  }

  std::uint64_t remaining() const { return remaining_; }

 private:
  std::istream& in_;
  std::uint64_t remaining_;
};
}  // namespace

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put_string64(out, data.config_text);
    put_string64(out, data.info_json);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(data.sections.size()));
    for (const auto& [name, m] : data.sections) {
      put_string32(out, name);
      put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
      put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
      out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    }
    out.flush();
    if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw CheckpointError("cannot stat checkpoint " + path.string());
  Reader r(in, size);
  char magic[sizeof(kCheckpointMagic)];
  if (size < sizeof(magic)) throw CheckpointError("corrupt checkpoint: bad magic");
  r.take(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) throw CheckpointError("corrupt checkpoint: bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointData d;
  d.config_text = r.string(r.get<std::uint64_t>());
  d.info_json = r.string(r.get<std::uint64_t>());
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.string(r.get<std::uint32_t>());
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (cols != 0 && rows > r.remaining() / sizeof(double) / cols) throw CheckpointError("corrupt checkpoint: section size");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    r.take(reinterpret_cast<char*>(m.data()), rows * cols * sizeof(double));
    d.sections.emplace_back(std::move(name), std::move(m));
  }
  if (r.remaining() != 0) throw CheckpointError("corrupt checkpoint: trailing bytes");
  return d;
}

CheckpointData snapshot(const ParameterStore& store, std::string config_text, std::string info_json) {
  CheckpointData d;
  d.config_text = std::move(config_text);
  d.info_json = std::move(info_json);
  for (const ad::Parameter* p : store.all()) d.sections.emplace_back(p->name, p->value);
  return d;
}

void restore(const CheckpointData& data, ParameterStore& store) {
  if (data.sections.size() != store.size()) {
    throw CheckpointError("checkpoint/config mismatch: " + std::to_string(data.sections.size()) +
                          " sections, model has " + std::to_string(store.size()) + " parameters");
  }
  for (const auto& [name, m] : data.sections) {
    ad::Parameter* p = store.find(name);
    if (!p) throw CheckpointError("checkpoint/config mismatch: unknown section " + name);
    if (p->value.rows() != m.rows() || p->value.cols() != m.cols()) {
      throw CheckpointError("checkpoint/config mismatch: shape of " + name);
    }
  }
  for (const auto& [name, m] : data.sections) store.get(name).value = m;
}

}  // namespace skgc
