#include "tce/tcemodel.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace tce {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

TceParams init_tce(const TceDims& dims, const WordVecTable& attr_vecs, const WordVecTable& obj_vecs,
                   Rng& rng) {
    require_shape(attr_vecs.dim == dims.word_dim && obj_vecs.dim == dims.word_dim,
                  "init_tce: word table dim != word_dim");
    const int m = static_cast<int>(attr_vecs.tokens.size());
    const int n = static_cast<int>(obj_vecs.tokens.size());
    TceParams p;
    p.dims = dims;
    {
        std::array<int, 2> d{dims.feature_dim, dims.latent_dim};
        std::array<Activation, 1> a{Activation::Identity};
        p.image_mapper = make_mlp(d, a, rng);
    }
    {
        std::array<int, 2> d{dims.word_dim, dims.latent_dim};
        std::array<Activation, 1> a{Activation::Identity};
        p.g_o = make_mlp(d, a, rng);
    }
    {
        std::array<int, 3> d{dims.latent_dim + dims.word_dim, dims.latent_dim, dims.latent_dim};
        std::array<Activation, 2> a{Activation::Relu, Activation::Identity};
        p.g_a = make_mlp(d, a, rng);
    }
    {
        std::array<int, 2> d{dims.latent_dim, n};
        std::array<Activation, 1> a{Activation::Identity};
        p.head_obj_proto = make_mlp(d, a, rng);
    }
    {
        std::array<int, 2> d{dims.latent_dim, m};
        std::array<Activation, 1> a{Activation::Identity};
        p.head_attr = make_mlp(d, a, rng);
    }
    {
        std::array<int, 2> d{dims.latent_dim, n};
        std::array<Activation, 1> a{Activation::Identity};
        p.head_obj = make_mlp(d, a, rng);
    }
    p.attr_table = attr_vecs.data;
    p.obj_table = obj_vecs.data;
    return p;
}

TceGrads TceGrads::zeros_like(const TceParams& p) {
    TceGrads g;
    g.image_mapper = MlpGrads::zeros_like(p.image_mapper);
    g.g_o = MlpGrads::zeros_like(p.g_o);
    g.g_a = MlpGrads::zeros_like(p.g_a);
    g.head_obj_proto = MlpGrads::zeros_like(p.head_obj_proto);
    g.head_attr = MlpGrads::zeros_like(p.head_attr);
    g.head_obj = MlpGrads::zeros_like(p.head_obj);
    g.attr_table = Mat(p.attr_table.rows, p.attr_table.cols);
    g.obj_table = Mat(p.obj_table.rows, p.obj_table.cols);
    return g;
}

Vec image_embed(const TceParams& p, std::span<const double> feature, MlpTape* tape) {
    return mlp_forward(p.image_mapper, feature, tape);
}

PrototypeForward object_prototype(const TceParams& p, int obj) {
    if (obj < 0 || obj >= p.num_objects()) throw IndexError("object_prototype: object index out of range");
    PrototypeForward f;
    f.obj = obj;
    f.proto = mlp_forward(p.g_o, p.obj_table.row(obj), &f.tape);
    return f;
}

Vec attribute_translation(const TceParams& p, std::span<const double> proto, int attr, MlpTape* tape) {
    if (attr < 0 || attr >= p.num_attributes())
        throw IndexError("attribute_translation: attribute index out of range");
    require_shape(static_cast<int>(proto.size()) == p.dims.latent_dim,
                  "attribute_translation: prototype dim mismatch");
    Vec input(proto.begin(), proto.end());
    auto ea = p.attr_table.row(attr);
    input.insert(input.end(), ea.begin(), ea.end());
    return mlp_forward(p.g_a, input, tape);
}

Vec compose_concept(std::span<const double> proto, std::span<const double> translation) {
    return vsum(proto, translation);
}

ConceptForward forward_concept(const TceParams& p, int attr, int obj) {
    ConceptForward f;
    f.attr = attr;
    f.proto = object_prototype(p, obj);
    f.translation = attribute_translation(p, f.proto.proto, attr, &f.ga_tape);
    f.embedding = compose_concept(f.proto.proto, f.translation);
    return f;
}

void backward_prototype(const TceParams& p, const PrototypeForward& f, std::span<const double> grad,
                        TceGrads& g, double scale) {
    Vec d_eo = mlp_backward(p.g_o, f.tape, grad, g.g_o, scale);
    axpy_row(g.obj_table, f.obj, d_eo, scale);
}

void backward_concept(const TceParams& p, const ConceptForward& f, std::span<const double> grad_embedding,
                      std::span<const double> grad_proto_direct, TceGrads& g, double scale) {
    const int D = p.dims.latent_dim;
    require_shape(static_cast<int>(grad_embedding.size()) == D, "backward_concept: grad dim mismatch");

    // x̂_ao = x̂_o + z_ao: identity into both branches
    Vec d_input = mlp_backward(p.g_a, f.ga_tape, grad_embedding, g.g_a, scale);

    Vec d_proto(grad_embedding.begin(), grad_embedding.end());
    for (int i = 0; i < D; ++i) d_proto[i] += d_input[i];
    if (!grad_proto_direct.empty()) {
        require_shape(static_cast<int>(grad_proto_direct.size()) == D,
                      "backward_concept: proto grad dim mismatch");
        for (int i = 0; i < D; ++i) d_proto[i] += grad_proto_direct[i];
    }

    axpy_row(g.attr_table, f.attr, std::span<const double>(d_input).subspan(D), scale);
    backward_prototype(p, f.proto, d_proto, g, scale);
}

void backward_image(const TceParams& p, const MlpTape& tape, std::span<const double> grad, TceGrads& g,
                    double scale) {
    mlp_backward(p.image_mapper, tape, grad, g.image_mapper, scale);
}

Mat concept_gallery(const TceParams& p, std::span<const ConceptId> concepts) {
    Mat gallery(static_cast<int>(concepts.size()), p.dims.latent_dim);
    for (std::size_t i = 0; i < concepts.size(); ++i) {
        ConceptForward f = forward_concept(p, concepts[i].first, concepts[i].second);
        std::copy(f.embedding.begin(), f.embedding.end(), gallery.row(static_cast<int>(i)).begin());
    }
    return gallery;
}

VisProdParams init_visprod(int feature_dim, int hidden_dim, int num_attrs, int num_objs, Rng& rng) {
    VisProdParams p;
    p.feature_dim = feature_dim;
    p.hidden_dim = hidden_dim;
    std::array<Activation, 2> acts{Activation::Relu, Activation::Identity};
    {
        std::array<int, 3> d{feature_dim, hidden_dim, num_attrs};
        p.attr_net = make_mlp(d, acts, rng);
    }
    {
        std::array<int, 3> d{feature_dim, hidden_dim, num_objs};
        p.obj_net = make_mlp(d, acts, rng);
    }
    return p;
}

VisProdForward visprod_forward(const VisProdParams& p, std::span<const double> feature) {
    VisProdForward f;
    f.attr_logits = mlp_forward(p.attr_net, feature);
    f.obj_logits = mlp_forward(p.obj_net, feature);
    f.attr_probs = softmax(f.attr_logits);
    f.obj_probs = softmax(f.obj_logits);
    return f;
}

double visprod_score(const VisProdForward& f, int attr, int obj) {
    if (attr < 0 || attr >= static_cast<int>(f.attr_probs.size()) || obj < 0 ||
        obj >= static_cast<int>(f.obj_probs.size()))
        throw IndexError("visprod_score: concept index out of range");
    return f.attr_probs[attr] * f.obj_probs[obj];
}

LabelEmbedParams init_labelembed(int feature_dim, int word_dim, const WordVecTable& attr_vecs,
                                 const WordVecTable& obj_vecs, Rng& rng) {
    require_shape(attr_vecs.dim == word_dim && obj_vecs.dim == word_dim,
                  "init_labelembed: word table dim mismatch");
    LabelEmbedParams p;
    p.feature_dim = feature_dim;
    p.word_dim = word_dim;
    {
        std::array<int, 2> d{feature_dim, word_dim};
        std::array<Activation, 1> a{Activation::Identity};
        p.image_mapper = make_mlp(d, a, rng);
    }
    {
        std::array<int, 3> d{2 * word_dim, 2 * word_dim, word_dim};
        std::array<Activation, 2> a{Activation::Relu, Activation::Identity};
        p.embedder = make_mlp(d, a, rng);
    }
    p.attr_table = attr_vecs.data;
    p.obj_table = obj_vecs.data;
    return p;
}

Vec labelembed_forward(const LabelEmbedParams& p, int attr, int obj, MlpTape* tape) {
    if (attr < 0 || attr >= p.num_attributes() || obj < 0 || obj >= p.num_objects())
        throw IndexError("labelembed_forward: concept index out of range");
    auto ea = p.attr_table.row(attr);
    auto eo = p.obj_table.row(obj);
    Vec input(ea.begin(), ea.end());
    input.insert(input.end(), eo.begin(), eo.end());
    return mlp_forward(p.embedder, input, tape);
}

Mat labelembed_gallery(const LabelEmbedParams& p, std::span<const ConceptId> concepts) {
    Mat gallery(static_cast<int>(concepts.size()), p.word_dim);
    for (std::size_t i = 0; i < concepts.size(); ++i) {
        Vec emb = labelembed_forward(p, concepts[i].first, concepts[i].second);
        std::copy(emb.begin(), emb.end(), gallery.row(static_cast<int>(i)).begin());
    }
    return gallery;
}

std::string model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::Tce: return "tce";
        case ModelKind::VisProd: return "visprod";
        case ModelKind::LabelEmbed: return "labelembed";
    }
    return "?";
}

ModelKind model_kind_from_name(const std::string& name) {
    if (name == "tce") return ModelKind::Tce;
    if (name == "visprod") return ModelKind::VisProd;
    if (name == "labelembed") return ModelKind::LabelEmbed;
    throw ConfigError("unknown model kind: '" + name + "' (expected tce|visprod|labelembed)");
}

ModelKind model_kind(const Model& model) {
    return static_cast<ModelKind>(model.index());
}

static void mlp_views(const std::string& prefix, Mlp& net, std::vector<TensorView>& out) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        auto& l = net.layers[i];
        out.push_back({prefix + ".w" + std::to_string(i), l.weight.rows, l.weight.cols, l.weight.a.data()});
        out.push_back({prefix + ".b" + std::to_string(i), 1, static_cast<int>(l.bias.size()), l.bias.data()});
    }
}

static void mlp_grad_views(const std::string& prefix, MlpGrads& g, std::vector<TensorView>& out) {
    for (std::size_t i = 0; i < g.weight.size(); ++i) {
        out.push_back({prefix + ".w" + std::to_string(i), g.weight[i].rows, g.weight[i].cols, g.weight[i].a.data()});
        out.push_back({prefix + ".b" + std::to_string(i), 1, static_cast<int>(g.bias[i].size()), g.bias[i].data()});
    }
}

std::vector<TensorView> tensor_views(TceParams& p) {
    std::vector<TensorView> out;
    mlp_views("image_mapper", p.image_mapper, out);
    mlp_views("g_o", p.g_o, out);
    mlp_views("g_a", p.g_a, out);
    mlp_views("head_obj_proto", p.head_obj_proto, out);
    mlp_views("head_attr", p.head_attr, out);
    mlp_views("head_obj", p.head_obj, out);
    out.push_back({"attr_table", p.attr_table.rows, p.attr_table.cols, p.attr_table.a.data()});
    out.push_back({"obj_table", p.obj_table.rows, p.obj_table.cols, p.obj_table.a.data()});
    return out;
}

std::vector<TensorView> tensor_views(TceGrads& g) {
    std::vector<TensorView> out;
    mlp_grad_views("image_mapper", g.image_mapper, out);
    mlp_grad_views("g_o", g.g_o, out);
    mlp_grad_views("g_a", g.g_a, out);
    mlp_grad_views("head_obj_proto", g.head_obj_proto, out);
    mlp_grad_views("head_attr", g.head_attr, out);
    mlp_grad_views("head_obj", g.head_obj, out);
    out.push_back({"attr_table", g.attr_table.rows, g.attr_table.cols, g.attr_table.a.data()});
    out.push_back({"obj_table", g.obj_table.rows, g.obj_table.cols, g.obj_table.a.data()});
    return out;
}

std::vector<TensorView> tensor_views(VisProdParams& p) {
    std::vector<TensorView> out;
    mlp_views("attr_net", p.attr_net, out);
    mlp_views("obj_net", p.obj_net, out);
    return out;
}

std::vector<TensorView> tensor_views(LabelEmbedParams& p) {
    std::vector<TensorView> out;
    mlp_views("image_mapper", p.image_mapper, out);
    mlp_views("embedder", p.embedder, out);
    out.push_back({"attr_table", p.attr_table.rows, p.attr_table.cols, p.attr_table.a.data()});
    out.push_back({"obj_table", p.obj_table.rows, p.obj_table.cols, p.obj_table.a.data()});
    return out;
}

std::vector<TensorView> tensor_views(Model& m) {
    return std::visit([](auto& p) { return tensor_views(p); }, m);
}

// ---- checkpoint I/O ---------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'T', 'C', 'E', 'M', 'O', 'D', 'L', '1'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    std::uint32_t n = read_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    return s;
}

struct Header {
    ModelKind kind;
    std::uint32_t num_attrs, num_objs, latent_dim, word_dim, feature_dim, hidden_dim;
};

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const ConceptSpace& space) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);

    Header h{};
    h.kind = model_kind(model);
    h.num_attrs = static_cast<std::uint32_t>(space.num_attributes());
    h.num_objs = static_cast<std::uint32_t>(space.num_objects());
    if (const auto* tce = std::get_if<TceParams>(&model)) {
        h.latent_dim = static_cast<std::uint32_t>(tce->dims.latent_dim);
        h.word_dim = static_cast<std::uint32_t>(tce->dims.word_dim);
        h.feature_dim = static_cast<std::uint32_t>(tce->dims.feature_dim);
    } else if (const auto* vp = std::get_if<VisProdParams>(&model)) {
        h.feature_dim = static_cast<std::uint32_t>(vp->feature_dim);
        h.hidden_dim = static_cast<std::uint32_t>(vp->hidden_dim);
    } else if (const auto* le = std::get_if<LabelEmbedParams>(&model)) {
        h.feature_dim = static_cast<std::uint32_t>(le->feature_dim);
        h.word_dim = static_cast<std::uint32_t>(le->word_dim);
        h.latent_dim = static_cast<std::uint32_t>(le->word_dim);
    }

    out.write(kMagic, 8);
    write_u32(out, kVersion);
    write_u32(out, static_cast<std::uint32_t>(h.kind));
    write_u32(out, h.num_attrs);
    write_u32(out, h.num_objs);
    write_u32(out, h.latent_dim);
    write_u32(out, h.word_dim);
    write_u32(out, h.feature_dim);
    write_u32(out, h.hidden_dim);

    write_u32(out, h.num_attrs);
    for (const auto& s : space.attributes) write_string(out, s);
    write_u32(out, h.num_objs);
    for (const auto& s : space.objects) write_string(out, s);

    Model copy = model;  // tensor_views needs mutable access
    auto views = tensor_views(copy);
    write_u32(out, static_cast<std::uint32_t>(views.size()));
    for (const auto& v : views) {
        write_u32(out, static_cast<std::uint32_t>(v.rows));
        write_u32(out, static_cast<std::uint32_t>(v.cols));
        out.write(reinterpret_cast<const char*>(v.data),
                  static_cast<std::streamsize>(sizeof(double) * v.rows * v.cols));
    }
    if (!out) throw IoError("short write on checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) throw FormatError("not a checkpoint file: " + path);
    std::uint32_t version = read_u32(in);
    if (version != kVersion) throw FormatError("unsupported checkpoint version");
    auto kind = static_cast<ModelKind>(read_u32(in));
    std::uint32_t m = read_u32(in), n = read_u32(in);
    std::uint32_t latent = read_u32(in), word = read_u32(in), feature = read_u32(in), hidden = read_u32(in);

    LoadedCheckpoint ck;
    std::uint32_t na = read_u32(in);
    ck.attributes.reserve(na);
    for (std::uint32_t i = 0; i < na; ++i) ck.attributes.push_back(read_string(in));
    std::uint32_t no = read_u32(in);
    ck.objects.reserve(no);
    for (std::uint32_t i = 0; i < no; ++i) ck.objects.push_back(read_string(in));
    if (na != m || no != n) throw FormatError("checkpoint name lists disagree with header dims");

    // Rebuild the architecture from the header, then fill tensors in order.
    Rng scratch(0);
    switch (kind) {
        case ModelKind::Tce: {
            WordVecTable at, ot;
            at.dim = ot.dim = static_cast<int>(word);
            at.tokens = ck.attributes;
            ot.tokens = ck.objects;
            at.data = Mat(static_cast<int>(m), static_cast<int>(word));
            ot.data = Mat(static_cast<int>(n), static_cast<int>(word));
            TceDims dims{static_cast<int>(feature), static_cast<int>(latent), static_cast<int>(word)};
            ck.model = init_tce(dims, at, ot, scratch);
            break;
        }
        case ModelKind::VisProd:
            ck.model = init_visprod(static_cast<int>(feature), static_cast<int>(hidden),
                                    static_cast<int>(m), static_cast<int>(n), scratch);
            break;
        case ModelKind::LabelEmbed: {
            WordVecTable at, ot;
            at.dim = ot.dim = static_cast<int>(word);
            at.tokens = ck.attributes;
            ot.tokens = ck.objects;
            at.data = Mat(static_cast<int>(m), static_cast<int>(word));
            ot.data = Mat(static_cast<int>(n), static_cast<int>(word));
            ck.model = init_labelembed(static_cast<int>(feature), static_cast<int>(word), at, ot, scratch);
            break;
        }
        default:
            throw FormatError("checkpoint: unknown model kind");
    }

    auto views = tensor_views(ck.model);
    std::uint32_t count = read_u32(in);
    if (count != views.size()) throw FormatError("checkpoint tensor count mismatch");
    for (auto& v : views) {
        std::uint32_t rows = read_u32(in), cols = read_u32(in);
        if (rows != static_cast<std::uint32_t>(v.rows) || cols != static_cast<std::uint32_t>(v.cols))
            throw FormatError("checkpoint tensor shape mismatch at " + v.name);
        in.read(reinterpret_cast<char*>(v.data),
                static_cast<std::streamsize>(sizeof(double) * v.rows * v.cols));
    }
    if (!in) throw FormatError("checkpoint truncated: " + path);
    return ck;
}

}  // namespace tce
