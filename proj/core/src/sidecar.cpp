#include "ugt/sidecar.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ugt {

namespace {

constexpr char kMagic[4] = {'U', 'G', 'T', 'S'};
constexpr std::uint32_t kVersion = 1;

enum class Dtype : std::uint8_t { F32 = 0, F64 = 1, U32 = 2, U8 = 3 };

struct Section {
    std::string tag; // exactly 8 bytes, space padded
    Dtype dtype;
    std::vector<std::uint64_t> dims;
    std::vector<unsigned char> bytes;
};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

class Reader {
  public:
    explicit Reader(std::string data) : data_(std::move(data)) {}
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(data_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == data_.size(); }

  private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw DataError("sidecar: truncated file");
    }
    std::string data_;
    std::size_t pos_ = 0;
};

Section make_f64(const std::string& tag, std::vector<std::uint64_t> dims,
                 const std::vector<double>& v) {
    Section s{tag, Dtype::F64, std::move(dims), {}};
    s.bytes.resize(v.size() * 8);
    std::memcpy(s.bytes.data(), v.data(), s.bytes.size());
    return s;
}

Section make_f32(const std::string& tag, std::vector<std::uint64_t> dims,
                 const std::vector<double>& v) {
    Section s{tag, Dtype::F32, std::move(dims), {}};
    std::vector<float> f(v.begin(), v.end());
    s.bytes.resize(f.size() * 4);
    std::memcpy(s.bytes.data(), f.data(), s.bytes.size());
    return s;
}

Section make_u32(const std::string& tag, std::vector<std::uint64_t> dims,
                 const std::vector<std::uint32_t>& v) {
    Section s{tag, Dtype::U32, std::move(dims), {}};
    s.bytes.resize(v.size() * 4);
    std::memcpy(s.bytes.data(), v.data(), s.bytes.size());
    return s;
}

Section make_u8(const std::string& tag, std::vector<std::uint64_t> dims,
                const std::vector<std::uint8_t>& v) {
    Section s{tag, Dtype::U8, std::move(dims), {}};
    s.bytes.assign(v.begin(), v.end());
    return s;
}

std::vector<double> take_f64(const Section& s) {
    std::vector<double> v(s.bytes.size() / 8);
    std::memcpy(v.data(), s.bytes.data(), s.bytes.size());
    return v;
}
std::vector<double> take_f32(const Section& s) {
    std::vector<float> f(s.bytes.size() / 4);
    std::memcpy(f.data(), s.bytes.data(), s.bytes.size());
    return std::vector<double>(f.begin(), f.end());
}
std::vector<std::uint32_t> take_u32(const Section& s) {
    std::vector<std::uint32_t> v(s.bytes.size() / 4);
    std::memcpy(v.data(), s.bytes.data(), s.bytes.size());
    return v;
}

} // namespace

void save_sidecar(const std::string& path, const Sidecars& sc) {
    std::vector<Section> sections;
    const std::uint64_t n = sc.n;

    sections.push_back(make_f32("IDENT   ", {n, sc.id_dim}, sc.identities));

    std::vector<std::uint32_t> vu, vv;
    std::vector<double> vs;
    for (NodeId v = 0; v < sc.virtual_edges.per_node.size(); ++v)
        for (const auto& e : sc.virtual_edges.per_node[v]) {
            vu.push_back(v);
            vv.push_back(e.peer);
            vs.push_back(e.score);
        }
    sections.push_back(make_u32("VEDGE_U ", {vu.size()}, vu));
    sections.push_back(make_u32("VEDGE_V ", {vv.size()}, vv));
    sections.push_back(make_f32("VEDGE_S ", {vs.size()}, vs));
    sections.push_back(make_u32("VPARAMS ",
                                {3},
                                {sc.virtual_edges.k_dtw, sc.virtual_edges.top_m,
                                 sc.virtual_edges.n_buckets}));

    std::vector<std::uint32_t> coff{0}, cids;
    std::vector<std::uint8_t> ctag;
    for (const auto& ctx : sc.context.per_node) {
        for (const auto& e : ctx) {
            cids.push_back(e.peer);
            ctag.push_back(static_cast<std::uint8_t>(e.tag));
        }
        coff.push_back(static_cast<std::uint32_t>(cids.size()));
    }
    sections.push_back(make_u32("CTX_OFF ", {coff.size()}, coff));
    sections.push_back(make_u32("CTX_IDS ", {cids.size()}, cids));
    sections.push_back(make_u8("CTX_TAG ", {ctag.size()}, ctag));
    sections.push_back(make_u32("CTX_KHOP", {1}, {sc.context.k_hop}));

    sections.push_back(make_f64("PE      ", {n, sc.pe.k}, sc.pe.matrix));
    sections.push_back(make_f64("PE_EVAL ", {sc.pe.eigenvalues.size()}, sc.pe.eigenvalues));

    for (unsigned s = 0; s < sc.transitions.p; ++s) {
        char tag[9];
        std::snprintf(tag, sizeof tag, "TRANS%03u", s + 1);
        sections.push_back(make_f64(tag, {n, n}, sc.transitions.mats[s]));
    }
    sections.push_back(make_f64("DRAW    ", {n, n}, sc.d_raw));

    std::string out(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(sections.size()));
    for (const auto& s : sections) {
        if (s.tag.size() != 8) throw DataError("sidecar: bad tag length");
        out += s.tag;
        out.push_back(char(s.dtype));
        out.push_back(char(s.dims.size()));
        for (auto d : s.dims) put_u64(out, d);
        put_u64(out, s.bytes.size());
        out.append(reinterpret_cast<const char*>(s.bytes.data()), s.bytes.size());
    }
    write_text_file_atomic(path, out);
}

Sidecars load_sidecar(const std::string& path) {
    Reader r(read_text_file(path));
    if (r.bytes(4) != std::string(kMagic, 4)) throw DataError(path + ": not a UGTS sidecar");
    if (r.u32() != kVersion) throw DataError(path + ": unsupported sidecar version");
    std::uint32_t n_sections = r.u32();

    struct Raw {
        Dtype dtype;
        std::vector<std::uint64_t> dims;
        Section sec;
    };
    std::map<std::string, Section> sections;
    for (std::uint32_t i = 0; i < n_sections; ++i) {
        Section s;
        s.tag = r.bytes(8);
        s.dtype = static_cast<Dtype>(r.bytes(1)[0]);
        std::size_t ndim = static_cast<std::uint8_t>(r.bytes(1)[0]);
        for (std::size_t d = 0; d < ndim; ++d) s.dims.push_back(r.u64());
        std::uint64_t len = r.u64();
        std::string payload = r.bytes(len);
        s.bytes.assign(payload.begin(), payload.end());
        sections.emplace(s.tag, std::move(s));
    }
    if (!r.done()) throw DataError(path + ": trailing bytes");

    auto get = [&](const std::string& tag) -> const Section& {
        auto it = sections.find(tag);
        if (it == sections.end()) throw DataError(path + ": missing section " + tag);
        return it->second;
    };

    Sidecars sc;
    const Section& ident = get("IDENT   ");
    sc.n = ident.dims.at(0);
    sc.id_dim = ident.dims.at(1);
    sc.identities = take_f32(ident);

    auto vparams = take_u32(get("VPARAMS "));
    sc.virtual_edges.k_dtw = vparams.at(0);
    sc.virtual_edges.top_m = vparams.at(1);
    sc.virtual_edges.n_buckets = vparams.at(2);
    sc.virtual_edges.per_node.resize(sc.n);
    auto vu = take_u32(get("VEDGE_U "));
    auto vv = take_u32(get("VEDGE_V "));
    auto vs = take_f32(get("VEDGE_S "));
    if (vu.size() != vv.size() || vu.size() != vs.size())
        throw DataError(path + ": inconsistent virtual edge sections");
    for (std::size_t i = 0; i < vu.size(); ++i)
        sc.virtual_edges.per_node.at(vu[i]).push_back({vv[i], vs[i]});

    sc.context.k_hop = take_u32(get("CTX_KHOP")).at(0);
    sc.context.per_node.resize(sc.n);
    auto coff = take_u32(get("CTX_OFF "));
    auto cids = take_u32(get("CTX_IDS "));
    const Section& ctag = get("CTX_TAG ");
    if (coff.size() != sc.n + 1) throw DataError(path + ": bad context offsets");
    for (std::size_t v = 0; v < sc.n; ++v)
        for (std::uint32_t i = coff[v]; i < coff[v + 1]; ++i)
            sc.context.per_node[v].push_back(
                {cids.at(i), static_cast<ContextTag>(ctag.bytes.at(i))});

    const Section& pe = get("PE      ");
    sc.pe.n = pe.dims.at(0);
    sc.pe.k = pe.dims.at(1);
    sc.pe.matrix = take_f64(pe);
    sc.pe.eigenvalues = take_f64(get("PE_EVAL "));

    unsigned p = 0;
    for (const auto& [tag, s] : sections)
        if (tag.rfind("TRANS", 0) == 0) ++p;
    sc.transitions.p = p;
    sc.transitions.n = sc.n;
    sc.transitions.mats.resize(p);
    for (unsigned s = 0; s < p; ++s) {
        char tag[9];
        std::snprintf(tag, sizeof tag, "TRANS%03u", s + 1);
        sc.transitions.mats[s] = take_f64(get(tag));
    }
    sc.d_raw = take_f64(get("DRAW    "));
    return sc;
}

std::string sidecar_summary_json(const Sidecars& sc) {
    nlohmann::ordered_json j;
    j["n_nodes"] = sc.n;
    j["identity_dim"] = sc.id_dim;
    j["n_virtual_edges"] = sc.virtual_edges.total_edges();
    j["k_hop"] = sc.context.k_hop;
    j["p_steps"] = sc.transitions.p;
    j["k_pe"] = sc.pe.k;
    std::size_t ctx_total = 0;
    for (const auto& c : sc.context.per_node) ctx_total += c.size();
    j["mean_context_size"] = sc.n ? double(ctx_total) / double(sc.n) : 0.0;

    // score histogram over virtual edges, 10 bins on [0, 2)
    std::vector<std::size_t> hist(10, 0);
    for (const auto& lst : sc.virtual_edges.per_node)
        for (const auto& e : lst) {
            int bin = std::min(9, int(e.score / 0.2));
            hist[bin < 0 ? 0 : bin]++;
        }
    for (auto& h : hist) h /= 2; // symmetric storage counts each edge twice
    j["score_histogram"] = hist;
    return j.dump(2);
}

} // namespace ugt
