#pragma once

#include <string>
#include <variant>
#include <vector>

#include "tce/diffcore.hpp"
#include "tce/embedspace.hpp"

namespace tce {

/// Network dimensions. feature_dim and word_dim follow the data; latent_dim
/// is the single shared dimension of image embeddings, object prototypes,
/// translations and concept embeddings.
struct TceDims {
    int feature_dim = 512;
    int latent_dim = 256;
    int word_dim = 300;
};

/// All trainable tensors of the TCE model:
///   image_mapper : feature_dim -> latent_dim, single affine layer
///   g_o          : word_dim -> latent_dim, single affine layer
///   g_a          : (latent_dim + word_dim) -> latent_dim -> latent_dim,
///                  ReLU hidden, identity output
///   three classifier heads (single affine layer each, logits)
///   attr_table / obj_table : trainable word-embedding rows
struct TceParams {
    TceDims dims;
    Mlp image_mapper;
    Mlp g_o;
    Mlp g_a;
    Mlp head_obj_proto;  // latent -> |objects|
    Mlp head_attr;       // latent -> |attributes|
    Mlp head_obj;        // latent -> |objects|
    Mat attr_table;      // m x word_dim
    Mat obj_table;       // n x word_dim

    int num_attributes() const { return attr_table.rows; }
    int num_objects() const { return obj_table.rows; }
};

TceParams init_tce(const TceDims& dims, const WordVecTable& attr_vecs, const WordVecTable& obj_vecs,
                   Rng& rng);

/// Gradient mirror of TceParams; accumulated over a batch.
struct TceGrads {
    MlpGrads image_mapper, g_o, g_a, head_obj_proto, head_attr, head_obj;
    Mat attr_table, obj_table;

    static TceGrads zeros_like(const TceParams& p);
};

// ---- forward pieces -------------------------------------------------------

/// x_ao = image_mapper(feature).
Vec image_embed(const TceParams& p, std::span<const double> feature, MlpTape* tape = nullptr);

struct PrototypeForward {
    int obj = -1;
    Vec proto;  // x̂_o
    MlpTape tape;
};
/// x̂_o = g_o(e_o) for the object's current embedding row.
PrototypeForward object_prototype(const TceParams& p, int obj);

/// z_ao = g_a(concat(x̂_o, e_a)); the translation is conditioned on the
/// object prototype, not on the attribute alone.
Vec attribute_translation(const TceParams& p, std::span<const double> proto, int attr,
                          MlpTape* tape = nullptr);

/// x̂_ao = x̂_o + z_ao.
Vec compose_concept(std::span<const double> proto, std::span<const double> translation);

struct ConceptForward {
    int attr = -1;
    PrototypeForward proto;
    Vec translation;
    Vec embedding;  // x̂_ao
    MlpTape ga_tape;
};
ConceptForward forward_concept(const TceParams& p, int attr, int obj);

// ---- backward pieces (accumulate into TceGrads) ---------------------------

/// Pushes a gradient at x̂_o back through g_o and into the object table row.
void backward_prototype(const TceParams& p, const PrototypeForward& f, std::span<const double> grad,
                        TceGrads& g, double scale = 1.0);

/// Pushes grad_embedding (at x̂_ao) plus any direct gradient at x̂_o back
/// through the composition, g_a, g_o and both embedding tables.
void backward_concept(const TceParams& p, const ConceptForward& f, std::span<const double> grad_embedding,
                      std::span<const double> grad_proto_direct, TceGrads& g, double scale = 1.0);

/// Pushes a gradient at x_ao back through the image mapper.
void backward_image(const TceParams& p, const MlpTape& tape, std::span<const double> grad, TceGrads& g,
                    double scale = 1.0);

/// Row i = concept embedding of concepts[i]; pure function of parameters.
Mat concept_gallery(const TceParams& p, std::span<const ConceptId> concepts);

// ---- reference baselines ---------------------------------------------------

/// Independent attribute and object classifiers on raw features; a concept
/// scores P(a)·P(o).
struct VisProdParams {
    int feature_dim = 512;
    int hidden_dim = 512;
    Mlp attr_net;  // feature -> hidden (ReLU) -> m logits
    Mlp obj_net;   // feature -> hidden (ReLU) -> n logits

    int num_attributes() const { return attr_net.out_dim(); }
    int num_objects() const { return obj_net.out_dim(); }
};

VisProdParams init_visprod(int feature_dim, int hidden_dim, int num_attrs, int num_objs, Rng& rng);

struct VisProdForward {
    Vec attr_logits, obj_logits;
    Vec attr_probs, obj_probs;
};
VisProdForward visprod_forward(const VisProdParams& p, std::span<const double> feature);
/// score(a, o) = P(a) * P(o)
double visprod_score(const VisProdForward& f, int attr, int obj);

/// Concept embedder on concat(e_a, e_o): 2*word_dim -> 2*word_dim (ReLU)
/// -> word_dim, with a single affine image mapper into the same space.
struct LabelEmbedParams {
    int feature_dim = 512;
    int word_dim = 300;
    Mlp image_mapper;  // feature -> word_dim
    Mlp embedder;      // 2*word_dim -> 2*word_dim -> word_dim
    Mat attr_table;
    Mat obj_table;

    int num_attributes() const { return attr_table.rows; }
    int num_objects() const { return obj_table.rows; }
};

LabelEmbedParams init_labelembed(int feature_dim, int word_dim, const WordVecTable& attr_vecs,
                                 const WordVecTable& obj_vecs, Rng& rng);

Vec labelembed_forward(const LabelEmbedParams& p, int attr, int obj, MlpTape* tape = nullptr);
Mat labelembed_gallery(const LabelEmbedParams& p, std::span<const ConceptId> concepts);

// ---- model variant + checkpoint I/O ----------------------------------------

enum class ModelKind { Tce = 0, VisProd = 1, LabelEmbed = 2 };

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

using Model = std::variant<TceParams, VisProdParams, LabelEmbedParams>;

ModelKind model_kind(const Model& model);

/// Named view over one trainable tensor (bias rows = 1). Declaration order
/// is the checkpoint tensor order.
struct TensorView {
    std::string name;
    int rows = 0;
    int cols = 0;
    double* data = nullptr;

    std::span<double> flat() { return {data, static_cast<std::size_t>(rows) * cols}; }
    std::span<const double> flat() const { return {data, static_cast<std::size_t>(rows) * cols}; }
};

std::vector<TensorView> tensor_views(TceParams& p);
std::vector<TensorView> tensor_views(TceGrads& g);
std::vector<TensorView> tensor_views(VisProdParams& p);
std::vector<TensorView> tensor_views(LabelEmbedParams& p);
std::vector<TensorView> tensor_views(Model& m);

/// Binary checkpoint: header (magic, version, kind, m, n, latent, word,
/// feature dims) followed by each tensor as u32 rows, u32 cols and
/// rows*cols little-endian f64, in declaration order.
void save_checkpoint(const std::string& path, const Model& model, const ConceptSpace& space);

struct LoadedCheckpoint {
    Model model;
    std::vector<std::string> attributes;
    std::vector<std::string> objects;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace tce
