#include "mgre/metf.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>

#include "mgre/errors.hpp"

namespace mgre {

static_assert(std::endian::native == std::endian::little, "METF I/O assumes a little-endian host");

namespace {

constexpr std::uint8_t kMagic[4] = {0x4D, 0x45, 0x54, 0x46};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

    template <typename T>
    T get(const char* what) {
        if (pos_ + sizeof(T) > bytes_.size()) throw FormatError(std::string("truncated ") + what, pos_);
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    const std::uint8_t* here() const { return bytes_.data() + pos_; }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& x) {
    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(x.dtype()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(x.shape().size()));
    for (auto e : x.shape()) put<std::uint64_t>(out, e);
    const std::uint8_t* payload;
    std::size_t nbytes;
    if (x.is_real()) {
        payload = reinterpret_cast<const std::uint8_t*>(x.real().data());
        nbytes = x.real().size() * sizeof(double);
    } else {
        payload = reinterpret_cast<const std::uint8_t*>(x.complex().data());
        nbytes = x.complex().size() * sizeof(cplx);
    }
    out.insert(out.end(), payload, payload + nbytes);
    return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    for (int i = 0; i < 4; ++i) {
        if (r.get<std::uint8_t>("magic") != kMagic[i]) throw FormatError("bad magic, expected \"METF\"", 0);
    }
    const auto version_at = r.pos();
    const auto version = r.get<std::uint32_t>("version");
    if (version != kVersion) throw FormatError("unsupported version " + std::to_string(version), version_at);
    const auto dtype_at = r.pos();
    const auto dtype = r.get<std::uint32_t>("dtype");
    if (dtype != 1 && dtype != 2) throw FormatError("unknown dtype code " + std::to_string(dtype), dtype_at);
    const auto ndim_at = r.pos();
    const auto ndim = r.get<std::uint32_t>("ndim");
    if (ndim == 0 || ndim > 16) throw FormatError("unsupported ndim " + std::to_string(ndim), ndim_at);
    Shape shape(ndim);
    std::uint64_t count = 1;
    for (auto& e : shape) {
        const auto at = r.pos();
        const auto v = r.get<std::uint64_t>("extent");
        if (v == 0) throw FormatError("zero extent", at);
        if (count > (std::uint64_t{1} << 40) / v) throw FormatError("tensor too large", at);
        e = static_cast<std::size_t>(v);
        count *= v;
    }
    const std::size_t elem = dtype == 1 ? sizeof(double) : sizeof(cplx);
    const std::size_t need = static_cast<std::size_t>(count) * elem;
    if (r.remaining() < need) {
        throw FormatError("truncated payload: header declares " + std::to_string(count) + " elements, payload holds " +
                              std::to_string(r.remaining() / elem),
                          r.pos() + r.remaining());
    }
    if (r.remaining() > need) throw FormatError("trailing bytes after payload", r.pos() + need);
    if (dtype == 1) {
        std::vector<double> data(count);
        std::memcpy(data.data(), r.here(), need);
        return RealArray(std::move(shape), std::move(data));
    }
    std::vector<cplx> data(count);
    std::memcpy(reinterpret_cast<void*>(data.data()), r.here(), need);
    return ComplexArray(std::move(shape), std::move(data));
}

Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_tensor(bytes);
}

void write_tensor(const Tensor& x, const std::filesystem::path& path) { write_file_atomic(path, encode_tensor(x)); }

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(contents.data()), static_cast<std::streamsize>(contents.size()));
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    write_file_atomic(path, std::vector<std::uint8_t>(contents.begin(), contents.end()));
}

void write_archive(const std::filesystem::path& dir, const Archive& archive) {
    std::filesystem::create_directories(dir);
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& [name, t] : archive.entries) {
        write_tensor(t, dir / (name + ".metf"));
        tensors.push_back({{"name", name}, {"dtype", t.is_real() ? "real64" : "complex128"}, {"shape", t.shape()}});
    }
    nlohmann::json manifest{{"meta", archive.meta}, {"tensors", tensors}};
    write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Archive read_archive(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw std::runtime_error("missing manifest.json in " + dir.string());
    const auto manifest = nlohmann::json::parse(in);
    Archive out;
    out.meta = manifest.value("meta", nlohmann::json::object());
    for (const auto& item : manifest.at("tensors")) {
        const auto name = item.at("name").get<std::string>();
        auto t = read_tensor(dir / (name + ".metf"));
        if (t.shape() != item.at("shape").get<Shape>()) {
            throw std::runtime_error("archive entry " + name + " shape disagrees with manifest");
        }
        out.entries.emplace_back(name, std::move(t));
    }
    return out;
}

}  // namespace mgre
