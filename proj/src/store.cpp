#include "iscat/store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <type_traits>

#include <nlohmann/json.hpp>

namespace iscat {

namespace {

constexpr std::uint32_t kSampleVersion = 1;
constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(sizeof(double) == 8);

template <class T>
void put_le(std::string& buf, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
            std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    buf.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

class Reader {
  public:
    Reader(const std::string& data, const std::string& path) : data_(data), path_(path) {}

    template <class T>
    T get_le() {
        if (pos_ + sizeof(T) > data_.size())
            throw TruncationError("truncated file " + path_ + ": expected " +
                                  std::to_string(pos_ + sizeof(T)) + " bytes, have " +
                                  std::to_string(data_.size()));
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, data_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) {
            for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
                std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
        }
        pos_ += sizeof(T);
        T v;
        std::memcpy(&v, bytes, sizeof(T));
        return v;
    }

    std::string get_bytes(std::size_t n) {
        if (pos_ + n > data_.size())
            throw TruncationError("truncated file " + path_);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool exhausted() const { return pos_ == data_.size(); }

  private:
    const std::string& data_;
    std::string path_;
    std::size_t pos_ = 0;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("short write to " + path);
}

void put_complex_array(std::string& buf, const Eigen::MatrixXcd& m, std::uint32_t role) {
    put_le<std::uint32_t>(buf, role);
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(m.rows()));
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            put_le<double>(buf, m(r, c).real());
            put_le<double>(buf, m(r, c).imag());
        }
}

Eigen::MatrixXcd get_complex_array(Reader& rd, std::uint32_t expected_role, const char* name) {
    const auto role = rd.get_le<std::uint32_t>();
    if (role != expected_role)
        throw IoError(std::string("sample record: unexpected role tag for ") + name);
    const auto rows = rd.get_le<std::uint32_t>();
    const auto cols = rd.get_le<std::uint32_t>();
    Eigen::MatrixXcd m(rows, cols);
    for (std::uint32_t c = 0; c < cols; ++c)
        for (std::uint32_t r = 0; r < rows; ++r) {
            const double re = rd.get_le<double>();
            const double im = rd.get_le<double>();
            m(r, c) = Complex(re, im);
        }
    return m;
}

void put_real_vector(std::string& buf, const std::vector<double>& v) {
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(v.size()));
    for (double x : v) put_le<double>(buf, x);
}

std::vector<double> get_real_vector(Reader& rd) {
    const auto n = rd.get_le<std::uint32_t>();
    std::vector<double> v(n);
    for (std::uint32_t i = 0; i < n; ++i) v[i] = rd.get_le<double>();
    return v;
}

enum Role : std::uint32_t {
    kChiTrue = 1,
    kChiBpClean = 2,
    kChiBpNoisy = 3,
    kJTrue = 4,
    kEtotTrue = 5,
    kEscaDoiNoisy = 6,
    kEscaMeaClean = 7,
    kEscaMeaNoisy = 8,
};

}  // namespace

void write_sample(const std::string& path, const SampleRecord& rec) {
    std::string buf;
    buf.append("ISCT", 4);
    put_le<std::uint32_t>(buf, kSampleVersion);
    put_le<std::uint32_t>(buf, rec.nx);
    put_le<std::uint32_t>(buf, rec.ny);
    put_le<std::uint32_t>(buf, rec.n_tx);
    put_le<std::uint32_t>(buf, rec.n_rx);
    put_le<double>(buf, rec.snr_db);
    put_complex_array(buf, rec.chi_true, kChiTrue);
    put_complex_array(buf, rec.chi_bp_clean, kChiBpClean);
    put_complex_array(buf, rec.chi_bp_noisy, kChiBpNoisy);
    put_complex_array(buf, rec.j_true, kJTrue);
    put_complex_array(buf, rec.etot_true, kEtotTrue);
    put_complex_array(buf, rec.esca_doi_noisy, kEscaDoiNoisy);
    put_complex_array(buf, rec.esca_mea_clean, kEscaMeaClean);
    put_complex_array(buf, rec.esca_mea_noisy, kEscaMeaNoisy);
    write_file(path, buf);
}

SampleRecord read_sample(const std::string& path) {
    const std::string data = read_file(path);
    Reader rd(data, path);
    if (rd.get_bytes(4) != "ISCT") throw BadMagicError("sample record: bad magic in " + path);
    const auto version = rd.get_le<std::uint32_t>();
    if (version != kSampleVersion)
        throw VersionError("sample record: unsupported version " + std::to_string(version));
    SampleRecord rec;
    rec.nx = rd.get_le<std::uint32_t>();
    rec.ny = rd.get_le<std::uint32_t>();
    rec.n_tx = rd.get_le<std::uint32_t>();
    rec.n_rx = rd.get_le<std::uint32_t>();
    rec.snr_db = rd.get_le<double>();
    rec.chi_true = get_complex_array(rd, kChiTrue, "chi_true");
    rec.chi_bp_clean = get_complex_array(rd, kChiBpClean, "chi_bp_clean");
    rec.chi_bp_noisy = get_complex_array(rd, kChiBpNoisy, "chi_bp_noisy");
    rec.j_true = get_complex_array(rd, kJTrue, "j_true");
    rec.etot_true = get_complex_array(rd, kEtotTrue, "etot_true");
    rec.esca_doi_noisy = get_complex_array(rd, kEscaDoiNoisy, "esca_doi_noisy");
    rec.esca_mea_clean = get_complex_array(rd, kEscaMeaClean, "esca_mea_clean");
    rec.esca_mea_noisy = get_complex_array(rd, kEscaMeaNoisy, "esca_mea_noisy");
    if (!rd.exhausted()) throw IoError("sample record: trailing bytes in " + path);
    return rec;
}

namespace {

void put_param_block(std::string& buf, const NetParams& p) {
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(p.convs.size()));
    for (const ConvParam& c : p.convs) {
        put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(c.in_c));
        put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(c.out_c));
        put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(c.k));
        put_real_vector(buf, c.w);
        put_real_vector(buf, c.b);
    }
    for (const BnParam& b : p.bns) {
        put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(b.c));
        put_real_vector(buf, b.gamma);
        put_real_vector(buf, b.beta);
        put_real_vector(buf, b.run_mean);
        put_real_vector(buf, b.run_var);
    }
}

void get_param_block(Reader& rd, NetParams& p) {
    const auto n = rd.get_le<std::uint32_t>();
    p.convs.resize(n);
    p.bns.resize(n);
    for (auto& c : p.convs) {
        c.in_c = static_cast<int>(rd.get_le<std::uint32_t>());
        c.out_c = static_cast<int>(rd.get_le<std::uint32_t>());
        c.k = static_cast<int>(rd.get_le<std::uint32_t>());
        c.w = get_real_vector(rd);
        c.b = get_real_vector(rd);
    }
    for (auto& b : p.bns) {
        b.c = static_cast<int>(rd.get_le<std::uint32_t>());
        b.gamma = get_real_vector(rd);
        b.beta = get_real_vector(rd);
        b.run_mean = get_real_vector(rd);
        b.run_var = get_real_vector(rd);
    }
}

}  // namespace

void write_checkpoint(const std::string& path, const Checkpoint& ck) {
    nlohmann::ordered_json cfg;
    cfg["net"] = {{"depth", ck.net_cfg.depth},
                  {"base_channels", ck.net_cfg.base_channels},
                  {"use_batchnorm", ck.net_cfg.use_batchnorm},
                  {"input_channels", ck.net_cfg.input_channels},
                  {"output_channels", ck.net_cfg.output_channels},
                  {"rng_seed", ck.net_cfg.rng_seed}};
    cfg["train"] = {{"lr0", ck.train_cfg.lr0},
                    {"momentum", ck.train_cfg.momentum},
                    {"epochs_max", ck.train_cfg.epochs_max},
                    {"lr_halving_period", ck.train_cfg.lr_halving_period},
                    {"batch_size", ck.train_cfg.batch_size},
                    {"loss_kind", static_cast<int>(ck.train_cfg.loss_kind)},
                    {"snr_train", ck.train_cfg.snr_train},
                    {"rng_seed", ck.train_cfg.rng_seed},
                    {"val_fraction", ck.train_cfg.val_fraction}};
    if (!ck.extra_json.empty()) cfg["extra"] = nlohmann::json::parse(ck.extra_json);
    const std::string cfg_str = cfg.dump();

    std::string buf;
    buf.append("ISCK", 4);
    put_le<std::uint32_t>(buf, kCheckpointVersion);
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(cfg_str.size()));
    buf += cfg_str;
    put_param_block(buf, ck.params);
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(ck.opt.epoch));
    put_le<double>(buf, ck.opt.lr);
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(ck.opt.vel_conv_w.size()));
    for (const auto& v : ck.opt.vel_conv_w) put_real_vector(buf, v);
    for (const auto& v : ck.opt.vel_conv_b) put_real_vector(buf, v);
    for (const auto& v : ck.opt.vel_bn_gamma) put_real_vector(buf, v);
    for (const auto& v : ck.opt.vel_bn_beta) put_real_vector(buf, v);
    write_file(path, buf);
}

Checkpoint read_checkpoint(const std::string& path) {
    const std::string data = read_file(path);
    Reader rd(data, path);
    if (rd.get_bytes(4) != "ISCK") throw BadMagicError("checkpoint: bad magic in " + path);
    const auto version = rd.get_le<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw VersionError("checkpoint: unsupported version " + std::to_string(version));
    const auto cfg_len = rd.get_le<std::uint32_t>();
    const nlohmann::json cfg = nlohmann::json::parse(rd.get_bytes(cfg_len));

    Checkpoint ck;
    const auto& n = cfg.at("net");
    ck.net_cfg.depth = n.at("depth").get<int>();
    ck.net_cfg.base_channels = n.at("base_channels").get<int>();
    ck.net_cfg.use_batchnorm = n.at("use_batchnorm").get<bool>();
    ck.net_cfg.input_channels = n.at("input_channels").get<int>();
    ck.net_cfg.output_channels = n.at("output_channels").get<int>();
    ck.net_cfg.rng_seed = n.at("rng_seed").get<std::uint64_t>();
    const auto& t = cfg.at("train");
    ck.train_cfg.lr0 = t.at("lr0").get<double>();
    ck.train_cfg.momentum = t.at("momentum").get<double>();
    ck.train_cfg.epochs_max = t.at("epochs_max").get<int>();
    ck.train_cfg.lr_halving_period = t.at("lr_halving_period").get<int>();
    ck.train_cfg.batch_size = t.at("batch_size").get<int>();
    ck.train_cfg.loss_kind = static_cast<LossKind>(t.at("loss_kind").get<int>());
    ck.train_cfg.snr_train = t.at("snr_train").get<double>();
    ck.train_cfg.rng_seed = t.at("rng_seed").get<std::uint64_t>();
    ck.train_cfg.val_fraction = t.at("val_fraction").get<double>();
    if (cfg.contains("extra")) ck.extra_json = cfg.at("extra").dump();

    ck.params.cfg = ck.net_cfg;
    get_param_block(rd, ck.params);
    ck.opt.epoch = static_cast<int>(rd.get_le<std::uint32_t>());
    ck.opt.lr = rd.get_le<double>();
    const auto nv = rd.get_le<std::uint32_t>();
    ck.opt.vel_conv_w.resize(nv);
    ck.opt.vel_conv_b.resize(nv);
    ck.opt.vel_bn_gamma.resize(nv);
    ck.opt.vel_bn_beta.resize(nv);
    for (auto& v : ck.opt.vel_conv_w) v = get_real_vector(rd);
    for (auto& v : ck.opt.vel_conv_b) v = get_real_vector(rd);
    for (auto& v : ck.opt.vel_bn_gamma) v = get_real_vector(rd);
    for (auto& v : ck.opt.vel_bn_beta) v = get_real_vector(rd);
    if (!rd.exhausted()) throw IoError("checkpoint: trailing bytes in " + path);
    return ck;
}

void export_image(const Eigen::VectorXd& map, int width, int height, const std::string& path,
                  double lo, double hi) {
    if (width < 1 || height < 1 || map.size() != static_cast<Eigen::Index>(width) * height)
        throw std::invalid_argument("export_image: shape mismatch");
    if (!(hi > lo)) throw std::invalid_argument("export_image: need hi > lo");

    std::string buf = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    // row 0 of the PGM is the top of the image (largest y)
    for (int row = 0; row < height; ++row) {
        const int iy = height - 1 - row;
        for (int ix = 0; ix < width; ++ix) {
            double t = (map[ix + static_cast<Eigen::Index>(width) * iy] - lo) / (hi - lo);
            t = std::clamp(t, 0.0, 1.0);
            buf.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0))));
        }
    }
    write_file(path, buf);

    nlohmann::ordered_json sidecar;
    sidecar["lo"] = lo;
    sidecar["hi"] = hi;
    sidecar["width"] = width;
    sidecar["height"] = height;
    write_file(path + ".json", sidecar.dump(2) + "\n");
}

std::uint64_t fnv1a64_file(const std::string& path) {
    const std::string data = read_file(path);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace iscat
