#include "sdore/errors.hpp"
#include "sdore/model.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

namespace sdore::model {

namespace {

constexpr std::string_view kMagic = "SDORECKP";
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxMembers = 1u << 16;
constexpr std::uint32_t kMaxLayers = 1u << 12;
constexpr std::uint32_t kMaxWidth = 1u << 24;

class Writer {
 public:
  void bytes(std::string_view s) { buf_.append(s); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
  }
  const std::string& data() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string data) : buf_(std::move(data)) {}

  void expect(std::string_view s, const std::string& section) {
    need(s.size(), section);
    if (std::string_view(buf_).substr(pos_, s.size()) != s) {
      throw ParseError("checkpoint " + section + ": bad magic string");
    }
    pos_ += s.size();
  }
  std::uint32_t u32(const std::string& section) {
    need(4, section);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte(pos_ + i)) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64(const std::string& section) {
    need(8, section);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(byte(pos_ + i)) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  unsigned char byte(std::size_t at) const { return static_cast<unsigned char>(buf_[at]); }
  void need(std::size_t n, const std::string& section) {
    if (buf_.size() - pos_ < n) {
      throw ParseError("checkpoint " + section + ": truncated at byte " + std::to_string(pos_));
    }
  }

  std::string buf_;
  std::size_t pos_ = 0;
};

std::string member_section(std::size_t k, const std::string& what) {
  return "member " + std::to_string(k) + " " + what;
}

}  // namespace

void save_checkpoint(const Ensemble& model, const std::filesystem::path& path) {
  model.validate();
  Writer w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(model.size()));
  for (const auto& m : model.members()) {
    w.u32(static_cast<std::uint32_t>(m.layer_dims().size()));
    for (int dim : m.layer_dims()) w.u32(static_cast<std::uint32_t>(dim));
  }
  for (int k = 0; k < model.size(); ++k) w.f64(model.alpha()(k));
  for (const auto& m : model.members()) {
    for (int l = 0; l < m.num_layers(); ++l) {
      const Matrix& a = m.weight(l);
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) w.f64(a(i, j));
      }
      for (Eigen::Index i = 0; i < m.bias(l).size(); ++i) w.f64(m.bias(l)(i));
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

void save_checkpoint(const ReQUNetwork& net, const std::filesystem::path& path) {
  save_checkpoint(Ensemble(net), path);
}

Ensemble load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}));

  r.expect(kMagic, "header");
  const std::uint32_t version = r.u32("header");
  if (version != kVersion) {
    throw ParseError("checkpoint header: unsupported version " + std::to_string(version));
  }
  const std::uint32_t members = r.u32("header");
  if (members == 0 || members > kMaxMembers) {
    throw ParseError("checkpoint header: implausible member count " + std::to_string(members));
  }

  std::vector<std::vector<int>> dims(members);
  for (std::size_t k = 0; k < members; ++k) {
    const std::string section = member_section(k, "layer_dims");
    const std::uint32_t count = r.u32(section);
    if (count < 2 || count > kMaxLayers) {
      throw ParseError("checkpoint " + section + ": implausible layer count " + std::to_string(count));
    }
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::uint32_t width = r.u32(section);
      if (width == 0 || width > kMaxWidth) {
        throw ParseError("checkpoint " + section + ": implausible width " + std::to_string(width));
      }
      dims[k].push_back(static_cast<int>(width));
    }
    if (dims[k].back() != 1) {
      throw ValidationError("checkpoint " + section + ": output width must be 1");
    }
    if (dims[k].front() != dims[0].front()) {
      throw ValidationError("checkpoint " + section + ": input width differs from member 0");
    }
  }

  Vector alpha(members);
  for (std::uint32_t k = 0; k < members; ++k) alpha(k) = r.f64("alpha");

  std::vector<ReQUNetwork> nets;
  for (std::size_t k = 0; k < members; ++k) {
    ReQUNetwork net(dims[k]);
    for (int l = 0; l < net.num_layers(); ++l) {
      const std::string section = member_section(k, "layer " + std::to_string(l));
      Matrix& a = net.weight(l);
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = r.f64(section + " weights");
      }
      for (Eigen::Index i = 0; i < net.bias(l).size(); ++i) net.bias(l)(i) = r.f64(section + " bias");
    }
    nets.push_back(std::move(net));
  }
  if (!r.done()) throw ParseError("checkpoint trailer: unexpected bytes after last layer");

  try {
    return Ensemble(std::move(nets), std::move(alpha));
  } catch (const ContractViolation& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace sdore::model
