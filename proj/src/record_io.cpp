#include "wafersim/record_io.hpp"

#include <atomic>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>
#include <thread>

#include "wafersim/format.hpp"

namespace wafersim {

std::string record_csv(const RunRecord& rec) {
  std::string out = "t,r,p,e,v,u,s,h1,h2,V,phase\n";
  out.reserve(out.size() + rec.size() * 180);
  const bool has_V = rec.V.size() == rec.size();
  for (std::size_t k = 0; k < rec.size(); ++k) {
    for (const auto* col : {&rec.t, &rec.r, &rec.p, &rec.e, &rec.v, &rec.u, &rec.s, &rec.h1, &rec.h2}) {
      append_number(out, (*col)[k]);
      out += ',';
    }
    if (has_V) append_number(out, rec.V[k]);
    out += ',';
    out += to_string(rec.phase[k]);
    out += '\n';
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  static std::atomic<unsigned> counter{0};
  auto tmp = path;
  std::ostringstream suffix;
  suffix << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id()) << '.' << counter++;
  tmp += suffix.str();
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("rename to " + path.string() + " failed: " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

namespace {

constexpr char kMagic[4] = {'W', 'S', 'R', 'C'};
constexpr std::uint32_t kFormat = 1;

struct Writer {
  std::string buf;
  template <class T>
  void pod(const T& x) {
    const char* p = reinterpret_cast<const char*>(&x);
    buf.append(p, sizeof(T));
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint64_t>(s.size()));
    buf += s;
  }
  void doubles(const std::vector<double>& xs) {
    pod(static_cast<std::uint64_t>(xs.size()));
    buf.append(reinterpret_cast<const char*>(xs.data()), xs.size() * sizeof(double));
  }
};

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  void need(std::size_t n) const {
    if (buf.size() - pos < n) throw std::runtime_error("record cache truncated");
  }
  template <class T>
  T pod() {
    need(sizeof(T));
    T x;
    std::memcpy(&x, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return x;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
  std::vector<double> doubles() {
    const auto n = pod<std::uint64_t>();
    need(n * sizeof(double));
    std::vector<double> xs(n);
    std::memcpy(xs.data(), buf.data() + pos, n * sizeof(double));
    pos += n * sizeof(double);
    return xs;
  }
};

}  // namespace

std::string encode_record(const RunRecord& rec) {
  Writer w;
  w.buf.append(kMagic, 4);
  w.pod(kFormat);
  w.str(rec.label);
  w.str(rec.controller);
  w.str(rec.config_hash);
  w.str(rec.version);
  w.str(rec.trajectory_shape);
  w.str(rec.abort_reason);
  w.pod(rec.step);
  w.pod(rec.wall_time);
  w.pod(static_cast<std::uint8_t>(rec.aborted));
  w.pod(static_cast<std::int64_t>(rec.abort_index ? static_cast<std::int64_t>(*rec.abort_index) : -1));
  w.pod(static_cast<std::int64_t>(rec.step_trigger_index ? static_cast<std::int64_t>(*rec.step_trigger_index) : -1));
  w.pod(static_cast<std::uint8_t>(rec.lyapunov_weights.has_value()));
  const LyapunovWeights lw = rec.lyapunov_weights.value_or(LyapunovWeights{});
  w.pod(lw.p1);
  w.pod(lw.p2);
  w.pod(lw.p4);
  w.pod(static_cast<std::uint8_t>(rec.phi_form));
  w.pod(rec.K_bar);
  w.pod(rec.h3);
  for (const auto* col : {&rec.t, &rec.r, &rec.r_ddot, &rec.p, &rec.e, &rec.v, &rec.u, &rec.s, &rec.h1, &rec.h2,
                          &rec.V, &rec.z}) {
    w.doubles(*col);
  }
  w.pod(static_cast<std::uint64_t>(rec.phase.size()));
  for (Phase p : rec.phase) w.pod(static_cast<std::uint8_t>(p));
  return std::move(w.buf);
}

RunRecord decode_record(const std::string& bytes) {
  Reader r{bytes};
  r.need(4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw std::runtime_error("not a record cache");
  r.pos = 4;
  if (r.pod<std::uint32_t>() != kFormat) throw std::runtime_error("unsupported record cache format");
  RunRecord rec;
  rec.label = r.str();
  rec.controller = r.str();
  rec.config_hash = r.str();
  rec.version = r.str();
  rec.trajectory_shape = r.str();
  rec.abort_reason = r.str();
  rec.step = r.pod<double>();
  rec.wall_time = r.pod<double>();
  rec.aborted = r.pod<std::uint8_t>() != 0;
  if (auto i = r.pod<std::int64_t>(); i >= 0) rec.abort_index = static_cast<std::size_t>(i);
  if (auto i = r.pod<std::int64_t>(); i >= 0) rec.step_trigger_index = static_cast<std::size_t>(i);
  const bool has_weights = r.pod<std::uint8_t>() != 0;
  LyapunovWeights lw;
  lw.p1 = r.pod<double>();
  lw.p2 = r.pod<double>();
  lw.p4 = r.pod<double>();
  if (has_weights) rec.lyapunov_weights = lw;
  const auto form = r.pod<std::uint8_t>();
  if (form > 2) throw std::runtime_error("record cache: bad phi form");
  rec.phi_form = static_cast<PhiForm>(form);
  rec.K_bar = r.pod<double>();
  rec.h3 = r.pod<double>();
  for (auto* col : {&rec.t, &rec.r, &rec.r_ddot, &rec.p, &rec.e, &rec.v, &rec.u, &rec.s, &rec.h1, &rec.h2,
                    &rec.V, &rec.z}) {
    *col = r.doubles();
  }
  const auto n = r.pod<std::uint64_t>();
  rec.phase.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto p = r.pod<std::uint8_t>();
    if (p > 2) throw std::runtime_error("record cache: bad phase");
    rec.phase.push_back(static_cast<Phase>(p));
  }
  if (r.pos != bytes.size()) throw std::runtime_error("record cache has trailing bytes");
  return rec;
}

void save_record(const RunRecord& record, const std::filesystem::path& path) {
  write_file_atomic(path, encode_record(record));
}

RunRecord load_record(const std::filesystem::path& path) { return decode_record(read_file(path)); }

}  // namespace wafersim
