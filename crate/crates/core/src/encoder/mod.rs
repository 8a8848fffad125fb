//! Conditioning-token construction: text encoding behind a frozen
//! embedding interface, type embeddings, a small point-cloud transformer,
//! pose and camera MLPs, and the token assembly that feeds the backbone.

mod text;

pub use text::{tokenize, HashTextEncoder, SidecarTextEncoder, TextEncoder, TextError};

use ndarray::Array2;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{CameraPose, PointCloud};
use crate::nn::{Binder, Graph, NnError, ParameterStore, TensorId};
use crate::rng::derive_rng;
use crate::scene::Role;

/// Token type ids indexing the 4-row type-embedding table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenType {
    Text,
    MovableObject,
    ReferenceObject,
    IrrelevantObject,
}

impl TokenType {
    pub fn index(self) -> usize {
        match self {
            TokenType::Text => 0,
            TokenType::MovableObject => 1,
            TokenType::ReferenceObject => 2,
            TokenType::IrrelevantObject => 3,
        }
    }

    pub fn from_role(role: Role) -> Self {
        match role {
            Role::Movable => TokenType::MovableObject,
            Role::Reference => TokenType::ReferenceObject,
            Role::Irrelevant => TokenType::IrrelevantObject,
        }
    }
}

pub const TYPE_TABLE_ROWS: usize = 4;

/// Architecture knobs shared by the encoders and the backbone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model_dim: usize,
    pub blocks: usize,
    pub heads: usize,
    /// Points each object cloud is farthest-point-sampled to.
    pub n_points: usize,
    pub max_text_tokens: usize,
    pub max_ref_objects: usize,
    pub max_irrelevant: usize,
    /// Seed for parameter initialization.
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            model_dim: 128,
            blocks: 4,
            heads: 4,
            n_points: 256,
            max_text_tokens: 16,
            max_ref_objects: 2,
            max_irrelevant: 6,
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn position_rows(&self) -> usize {
        // camera + text slots + movable + reference slots + one shared
        // irrelevant slot (their list order must not be signal)
        3 + self.max_text_tokens + self.max_ref_objects
    }

    pub fn init_rng(&self, label: &str) -> ChaCha12Rng {
        derive_rng(self.init_seed, label, 0)
    }
}

/// Creates every model parameter up front so checkpoints and gradient
/// maps are complete regardless of which paths a batch exercises.
pub fn init_encoder_params(store: &mut ParameterStore, cfg: &ModelConfig) {
    let d = cfg.model_dim;
    let mut rng = cfg.init_rng("encoder-init");
    store.get_or_init("pcl.mlp1.w", 3, d, &mut rng);
    store.get_or_init("pcl.mlp1.b", 1, d, &mut rng);
    store.get_or_init("pcl.mlp2.w", d, d, &mut rng);
    store.get_or_init("pcl.mlp2.b", 1, d, &mut rng);
    for i in 0..2 {
        for name in ["wq", "wk", "wv", "wo"] {
            store.get_or_init(&format!("pcl.attn{i}.{name}"), d, d, &mut rng);
        }
    }
    store.get_or_init("pose.mlp1.w", 9, d, &mut rng);
    store.get_or_init("pose.mlp1.b", 1, d, &mut rng);
    store.get_or_init("pose.mlp2.w", d, d, &mut rng);
    store.get_or_init("pose.mlp2.b", 1, d, &mut rng);
    store.get_or_init("cam.mlp1.w", 15, d, &mut rng);
    store.get_or_init("cam.mlp1.b", 1, d, &mut rng);
    store.get_or_init("cam.mlp2.w", d, d, &mut rng);
    store.get_or_init("cam.mlp2.b", 1, d, &mut rng);
    store.get_or_init("obj.proj.w", 2 * d, d, &mut rng);
    store.get_or_init("obj.proj.b", 1, d, &mut rng);
    store.get_or_init("type.table", TYPE_TABLE_ROWS, d, &mut rng);
    store.get_or_init("pos.table", cfg.position_rows(), d, &mut rng);
}

fn mlp2(
    g: &mut Graph,
    binder: &mut Binder,
    prefix: &str,
    x: TensorId,
) -> Result<TensorId, NnError> {
    let w1 = binder.param(g, &format!("{prefix}.mlp1.w"));
    let b1 = binder.param(g, &format!("{prefix}.mlp1.b"));
    let w2 = binder.param(g, &format!("{prefix}.mlp2.w"));
    let b2 = binder.param(g, &format!("{prefix}.mlp2.b"));
    let h = g.matmul(x, w1)?;
    let h = g.add_row(h, b1)?;
    let h = g.gelu(h);
    let h = g.matmul(h, w2)?;
    g.add_row(h, b2)
}

/// Point Cloud Transformer in miniature: per-point MLP, two residual
/// self-attention blocks, max-pool to a single embedding. The caller is
/// responsible for farthest-point-sampling the cloud to `n_points`
/// first (seeded per instance).
pub fn encode_object_cloud(
    g: &mut Graph,
    binder: &mut Binder,
    cfg: &ModelConfig,
    sampled: &PointCloud,
) -> Result<TensorId, NnError> {
    assert!(!sampled.is_empty(), "encoder requires a non-empty cloud");
    let pts = Array2::from_shape_fn((sampled.len(), 3), |(i, j)| {
        let p = sampled.points[i];
        [p.x, p.y, p.z][j]
    });
    let x = g.leaf(pts);
    let mut h = mlp2(g, binder, "pcl", x)?;
    for i in 0..2 {
        let wq = binder.param(g, &format!("pcl.attn{i}.wq"));
        let wk = binder.param(g, &format!("pcl.attn{i}.wk"));
        let wv = binder.param(g, &format!("pcl.attn{i}.wv"));
        let wo = binder.param(g, &format!("pcl.attn{i}.wo"));
        let n = g.layer_norm(h);
        let q = g.matmul(n, wq)?;
        let k = g.matmul(n, wk)?;
        let v = g.matmul(n, wv)?;
        let attn = g.multi_head_attention(q, k, v, cfg.heads)?;
        let proj = g.matmul(attn, wo)?;
        h = g.add(h, proj)?;
    }
    Ok(g.max_pool_rows(h))
}

/// Two-layer MLP over the 9-D pose vector.
pub fn encode_pose(
    g: &mut Graph,
    binder: &mut Binder,
    pose_vec: &[f64; 9],
) -> Result<TensorId, NnError> {
    assert!(pose_vec.iter().all(|v| v.is_finite()), "pose vector must be finite");
    let x = g.leaf(Array2::from_shape_vec((1, 9), pose_vec.to_vec()).unwrap());
    mlp2(g, binder, "pose", x)
}

fn camera_features(camera: &CameraPose) -> Array2<f64> {
    let mut f = Vec::with_capacity(15);
    for row in camera.pose.rotation.m {
        f.extend_from_slice(&row);
    }
    let t = camera.pose.translation;
    f.extend_from_slice(&[t.x, t.y, t.z]);
    // keep intrinsics near unit scale
    f.extend_from_slice(&[camera.focal / 100.0, camera.width as f64 / 100.0, camera.height as f64 / 100.0]);
    Array2::from_shape_vec((1, 15), f).unwrap()
}

pub fn encode_camera(
    g: &mut Graph,
    binder: &mut Binder,
    camera: &CameraPose,
) -> Result<TensorId, NnError> {
    let x = g.leaf(camera_features(camera));
    mlp2(g, binder, "cam", x)
}

/// Sinusoidal embedding of the diffusion time-step.
pub fn time_embedding(t: usize, dim: usize) -> Array2<f64> {
    let mut v = vec![0.0; dim];
    for i in 0..dim / 2 {
        let freq = (t as f64) / 10000f64.powf(2.0 * i as f64 / dim as f64);
        v[2 * i] = freq.sin();
        v[2 * i + 1] = freq.cos();
    }
    Array2::from_shape_vec((1, dim), v).unwrap()
}

/// One object's conditioning inputs: the already-encoded cloud content
/// (so samplers can cache it) plus the 9-D pose vector for this step.
pub struct ObjectTokenInput {
    pub cloud_content: TensorId,
    pub pose_vec: [f64; 9],
    pub role: Role,
}

/// Metadata describing one assembled token.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenInfo {
    pub token_type: Option<TokenType>, // None for the camera token
    pub position_index: usize,
}

/// The assembled conditioning sequence: an (L x dim) matrix in the graph
/// plus per-token metadata. `movable_row` indexes the movable object's
/// token, where the denoiser head is read.
pub struct TokenSequence {
    pub tokens: TensorId,
    pub info: Vec<TokenInfo>,
    pub movable_row: Option<usize>,
}

/// Combines the six embedding kinds additively: content + type +
/// position + time, with the camera token first, then text tokens, then
/// object tokens in scene order. Object position indices are keyed by
/// (role, index within role), so irrelevant-object list order carries no
/// signal.
pub fn assemble_tokens(
    g: &mut Graph,
    binder: &mut Binder,
    cfg: &ModelConfig,
    text_embeddings: &Array2<f64>,
    camera: &CameraPose,
    objects: &[ObjectTokenInput],
    t: usize,
) -> Result<TokenSequence, NnError> {
    assert_eq!(text_embeddings.ncols(), cfg.model_dim, "text embedding dim mismatch");
    let n_text = text_embeddings.nrows().min(cfg.max_text_tokens);

    let mut rows: Vec<TensorId> = Vec::new();
    let mut info: Vec<TokenInfo> = Vec::new();
    let mut type_ids: Vec<usize> = Vec::new();
    let mut pos_ids: Vec<usize> = Vec::new();

    rows.push(encode_camera(g, binder, camera)?);
    info.push(TokenInfo { token_type: None, position_index: 0 });
    // camera has no role; give it the text type row but position 0
    type_ids.push(TokenType::Text.index());
    pos_ids.push(0);

    let text_leaf = g.leaf(text_embeddings.slice(ndarray::s![..n_text, ..]).to_owned());
    rows.push(text_leaf);
    for i in 0..n_text {
        info.push(TokenInfo { token_type: Some(TokenType::Text), position_index: 1 + i });
        type_ids.push(TokenType::Text.index());
        pos_ids.push(1 + i);
    }

    let mut movable_row = None;
    let mut ref_count = 0usize;
    for obj in objects {
        let pose_emb = encode_pose(g, binder, &obj.pose_vec)?;
        let cat = g.concat_cols(&[obj.cloud_content, pose_emb])?;
        let wp = binder.param(g, "obj.proj.w");
        let bp = binder.param(g, "obj.proj.b");
        let content = g.matmul(cat, wp)?;
        let content = g.add_row(content, bp)?;
        rows.push(content);

        let token_type = TokenType::from_role(obj.role);
        let pos = match obj.role {
            Role::Movable => 1 + cfg.max_text_tokens,
            Role::Reference => {
                let p = 2 + cfg.max_text_tokens + ref_count.min(cfg.max_ref_objects - 1);
                ref_count += 1;
                p
            }
            // all irrelevant objects share one position row, so their
            // ordering carries no signal
            Role::Irrelevant => 2 + cfg.max_text_tokens + cfg.max_ref_objects,
        };
        if obj.role == Role::Movable {
            movable_row = Some(info.len());
        }
        info.push(TokenInfo { token_type: Some(token_type), position_index: pos });
        type_ids.push(token_type.index());
        pos_ids.push(pos);
    }

    let content = g.concat_rows(&rows)?;
    let type_table = binder.param(g, "type.table");
    let pos_table = binder.param(g, "pos.table");
    let typ = g.embedding_lookup(type_table, &type_ids)?;
    let pos = g.embedding_lookup(pos_table, &pos_ids)?;
    let sum = g.add(content, typ)?;
    let sum = g.add(sum, pos)?;
    let time_leaf = g.leaf(time_embedding(t, cfg.model_dim));
    let tokens = g.add_row(sum, time_leaf)?;

    Ok(TokenSequence { tokens, info, movable_row })
}
