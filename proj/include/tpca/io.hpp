#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "error.hpp"
#include "fock.hpp"
#include "instance.hpp"
#include "sym_tensor.hpp"

namespace tpca {

using Json = nlohmann::ordered_json;

class IoError : public Error {
public:
    using Error::Error;
};

/// Tensor file contents: a symmetric tensor in canonical order plus the
/// generation metadata.
struct TensorFile {
    RealTensor T;
    double lambda = 0.0;
    bool spiked = false;
    std::uint64_t seed = 0;
    Eigen::VectorXd signal; ///< empty when unknown
    ModelParams params;
};

inline constexpr char kTensorMagic[8] = {'T', 'P', 'C', 'A', 'T', 'N', 'S', '4'};
inline constexpr std::uint32_t kTensorVersion = 1;

inline Json params_to_json(const ModelParams& p) {
    Json j;
    j["N"] = p.N;
    j["n_bos"] = p.n_bos;
    j["p"] = p.p;
    j["lambda_bar"] = p.lambda_bar;
    j["zeta"] = p.zeta > 0.0 || p.N < 2 ? p.zeta : default_zeta(p.N);
    j["seed"] = p.seed;
    j["ensemble"] = to_string(p.ensemble);
    j["convention"] = to_string(p.convention);
    return j;
}

inline ModelParams params_from_json(const Json& j) {
    ModelParams p;
    p.N = j.at("N").get<int>();
    p.n_bos = j.at("n_bos").get<int>();
    p.p = j.at("p").get<int>();
    p.lambda_bar = j.at("lambda_bar").get<double>();
    p.zeta = j.at("zeta").get<double>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.ensemble = j.at("ensemble").get<std::string>() == "complex" ? Ensemble::complex : Ensemble::real;
    p.convention = j.at("convention").get<std::string>() == "unit_distinct" ? VarianceConvention::unit_distinct
                                                                             : VarianceConvention::average;
    return p;
}

inline Json tensor_to_json(const TensorFile& f) {
    Json j;
    j["format"] = "tpca-tensor";
    j["version"] = kTensorVersion;
    j["N"] = f.T.N();
    j["p"] = 4;
    j["ensemble"] = "real";
    j["layout"] = "sorted-tuples";
    j["lambda"] = f.lambda;
    j["spiked"] = f.spiked;
    j["seed"] = f.seed;
    j["params"] = params_to_json(f.params);
    j["signal"] = std::vector<double>(f.signal.data(), f.signal.data() + f.signal.size());
    j["entries"] = f.T.data();
    return j;
}

inline TensorFile tensor_from_json(const Json& j) {
    if (j.value("format", std::string{}) != "tpca-tensor") throw IoError("tensor file: not a tpca-tensor document");
    if (j.at("version").get<std::uint32_t>() != kTensorVersion) throw IoError("tensor file: unsupported version");
    if (j.value("layout", std::string{}) != "sorted-tuples") throw IoError("tensor file: unsupported layout");
    if (j.value("p", 0) != 4) throw IoError("tensor file: only p = 4 is supported");
    TensorFile f;
    const int N = j.at("N").get<int>();
    f.T = RealTensor(N);
    const auto e = j.at("entries").get<std::vector<double>>();
    if (e.size() != f.T.size()) throw IoError("tensor file: entry count does not match N");
    f.T.data() = e;
    f.lambda = j.at("lambda").get<double>();
    f.spiked = j.at("spiked").get<bool>();
    f.seed = j.at("seed").get<std::uint64_t>();
    f.params = params_from_json(j.at("params"));
    const auto s = j.at("signal").get<std::vector<double>>();
    if (!s.empty() && static_cast<int>(s.size()) != N) throw IoError("tensor file: signal length does not match N");
    f.signal = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
    return f;
}

namespace detail {

template <class T>
void put_le(std::string& out, T value) {
    static_assert(std::endian::native == std::endian::little, "binary tensor format assumes a little-endian host");
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

template <class T>
T get_le(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw IoError("tensor file: truncated binary data");
    T value;
    std::memcpy(&value, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return value;
}

} // namespace detail

/// Binary layout (little endian): magic[8], u32 version, u32 header_len,
/// JSON header (tensor_to_json without "entries"/"signal"), u32 signal_len,
/// f64 signal[signal_len], f64 entries[C(N+3,4)].
inline std::string tensor_to_binary(const TensorFile& f) {
    Json header = tensor_to_json(f);
    header.erase("entries");
    header.erase("signal");
    const std::string h = header.dump();
    std::string out(kTensorMagic, sizeof(kTensorMagic));
    detail::put_le<std::uint32_t>(out, kTensorVersion);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(h.size()));
    out += h;
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.signal.size()));
    for (Eigen::Index i = 0; i < f.signal.size(); ++i) detail::put_le<double>(out, f.signal[i]);
    for (std::size_t i = 0; i < f.T.size(); ++i) detail::put_le<double>(out, f.T.data()[i]);
    return out;
}

inline TensorFile tensor_from_binary(const std::string& in) {
    if (in.size() < sizeof(kTensorMagic) || std::memcmp(in.data(), kTensorMagic, sizeof(kTensorMagic)) != 0)
        throw IoError("tensor file: bad magic");
    std::size_t pos = sizeof(kTensorMagic);
    if (detail::get_le<std::uint32_t>(in, pos) != kTensorVersion) throw IoError("tensor file: unsupported version");
    const auto hlen = detail::get_le<std::uint32_t>(in, pos);
    if (pos + hlen > in.size()) throw IoError("tensor file: truncated header");
    Json header = Json::parse(in.substr(pos, hlen));
    pos += hlen;
    const auto slen = detail::get_le<std::uint32_t>(in, pos);
    std::vector<double> signal(slen);
    for (auto& x : signal) x = detail::get_le<double>(in, pos);
    const int N = header.at("N").get<int>();
    std::vector<double> entries(binomial(N + 3, 4));
    for (auto& x : entries) x = detail::get_le<double>(in, pos);
    if (pos != in.size()) throw IoError("tensor file: trailing bytes");
    header["signal"] = signal;
    header["entries"] = entries;
    return tensor_from_json(header);
}

inline std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& data) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!os) throw IoError("write to '" + path + "' failed");
}

/// Reads either format, detected from the leading bytes.
inline TensorFile read_tensor_file(const std::string& path) {
    const std::string data = read_file(path);
    try {
        if (data.size() >= sizeof(kTensorMagic) && std::memcmp(data.data(), kTensorMagic, sizeof(kTensorMagic)) == 0)
            return tensor_from_binary(data);
        return tensor_from_json(Json::parse(data));
    } catch (const Json::exception& e) {
        throw IoError("'" + path + "': " + e.what());
    } catch (const IoError& e) {
        throw IoError("'" + path + "': " + e.what());
    }
}

/// State snapshot: {"format":"tpca-state", N, n_bos, ordering:"colex",
/// amps: [[re, im], ...]} in basis order.
inline Json state_to_json(const ComplexState& x) {
    Json j;
    j["format"] = "tpca-state";
    j["version"] = 1;
    j["N"] = x.basis->N();
    j["n_bos"] = x.basis->n_bos();
    j["ordering"] = "colex";
    Json amps = Json::array();
    for (Eigen::Index i = 0; i < x.amps.size(); ++i) amps.push_back({x.amps[i].real(), x.amps[i].imag()});
    j["amps"] = std::move(amps);
    return j;
}

inline ComplexState state_from_json(const Json& j) {
    if (j.value("format", std::string{}) != "tpca-state") throw IoError("state file: not a tpca-state document");
    if (j.value("ordering", std::string{}) != "colex") throw IoError("state file: unsupported ordering");
    auto basis = build_basis(j.at("N").get<int>(), j.at("n_bos").get<int>());
    const auto& amps = j.at("amps");
    if (amps.size() != basis->dim()) throw IoError("state file: amplitude count does not match the basis");
    ComplexState x(basis);
    for (std::size_t i = 0; i < amps.size(); ++i)
        x.amps[static_cast<Eigen::Index>(i)] = Complex(amps[i].at(0).get<double>(), amps[i].at(1).get<double>());
    return x;
}

/// Shortest round-trip representation, as used in CSV tables.
inline std::string format_double(double x) {
    return Json(x).dump();
}

} // namespace tpca
