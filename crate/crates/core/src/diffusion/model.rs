//! The denoiser: conditioning encoders feeding a pre-LN transformer whose
//! head, read at the movable object's token, predicts the 9-D noise.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use super::posevec::{pose_to_vector, vector_to_pose};
use super::schedule::{forward_noise, NoiseSchedule};
use super::DiffusionError;
use crate::datagen::Instance;
use crate::encoder::{
    assemble_tokens, encode_object_cloud, init_encoder_params, ModelConfig, ObjectTokenInput,
    TextEncoder,
};
use crate::geometry::{farthest_point_sample, PointCloud, Pose, CameraPose};
use crate::nn::{Binder, Graph, NnError, ParameterStore, TensorId};
use crate::rng::{derive_rng, stable_hash};
use crate::scene::{Role, Workspace};

/// Creates the full parameter set: encoders, `blocks` pre-LN transformer
/// blocks with affine layer norms, a final norm and the 9-D output head.
pub fn init_denoiser_params(store: &mut ParameterStore, cfg: &ModelConfig) {
    init_encoder_params(store, cfg);
    let d = cfg.model_dim;
    let mut rng = cfg.init_rng("backbone-init");
    for i in 0..cfg.blocks {
        for name in ["wq", "wk", "wv", "wo"] {
            store.get_or_init(&format!("blk{i}.attn.{name}"), d, d, &mut rng);
        }
        store.get_or_init(&format!("blk{i}.mlp1.w"), d, 4 * d, &mut rng);
        store.get_or_init(&format!("blk{i}.mlp1.b"), 1, 4 * d, &mut rng);
        store.get_or_init(&format!("blk{i}.mlp2.w"), 4 * d, d, &mut rng);
        store.get_or_init(&format!("blk{i}.mlp2.b"), 1, d, &mut rng);
        for ln in ["ln1", "ln2"] {
            store.insert(&format!("blk{i}.{ln}.g"), Array2::ones((1, d)));
            store.insert(&format!("blk{i}.{ln}.b"), Array2::zeros((1, d)));
        }
    }
    store.insert("lnf.g", Array2::ones((1, d)));
    store.insert("lnf.b", Array2::zeros((1, d)));
    store.get_or_init("head.w", d, 9, &mut rng);
    store.get_or_init("head.b", 1, 9, &mut rng);
}

fn affine_norm(
    g: &mut Graph,
    binder: &mut Binder,
    prefix: &str,
    x: TensorId,
) -> Result<TensorId, NnError> {
    let gain = binder.param(g, &format!("{prefix}.g"));
    let bias = binder.param(g, &format!("{prefix}.b"));
    let n = g.layer_norm(x);
    let n = g.mul_row(n, gain)?;
    g.add_row(n, bias)
}

pub fn backbone(
    g: &mut Graph,
    binder: &mut Binder,
    cfg: &ModelConfig,
    tokens: TensorId,
) -> Result<TensorId, NnError> {
    let mut h = tokens;
    for i in 0..cfg.blocks {
        let n = affine_norm(g, binder, &format!("blk{i}.ln1"), h)?;
        let wq = binder.param(g, &format!("blk{i}.attn.wq"));
        let wk = binder.param(g, &format!("blk{i}.attn.wk"));
        let wv = binder.param(g, &format!("blk{i}.attn.wv"));
        let wo = binder.param(g, &format!("blk{i}.attn.wo"));
        let q = g.matmul(n, wq)?;
        let k = g.matmul(n, wk)?;
        let v = g.matmul(n, wv)?;
        let attn = g.multi_head_attention(q, k, v, cfg.heads)?;
        let proj = g.matmul(attn, wo)?;
        h = g.add(h, proj)?;

        let n = affine_norm(g, binder, &format!("blk{i}.ln2"), h)?;
        let w1 = binder.param(g, &format!("blk{i}.mlp1.w"));
        let b1 = binder.param(g, &format!("blk{i}.mlp1.b"));
        let w2 = binder.param(g, &format!("blk{i}.mlp2.w"));
        let b2 = binder.param(g, &format!("blk{i}.mlp2.b"));
        let m = g.matmul(n, w1)?;
        let m = g.add_row(m, b1)?;
        let m = g.gelu(m);
        let m = g.matmul(m, w2)?;
        let m = g.add_row(m, b2)?;
        h = g.add(h, m)?;
    }
    affine_norm(g, binder, "lnf", h)
}

/// Everything the denoiser needs about one instance, precomputed once:
/// frozen text embeddings, FPS-sampled world-frame clouds, roles, initial
/// pose vectors and the goal pose vector (the diffusion target).
#[derive(Debug, Clone)]
pub struct PreparedInstance {
    pub text_emb: Array2<f64>,
    pub camera: CameraPose,
    pub clouds: Vec<PointCloud>,
    pub roles: Vec<Role>,
    pub pose_vecs: Vec<[f64; 9]>,
    pub goal_vec: [f64; 9],
    pub movable_index: usize,
    pub workspace: Workspace,
}

/// Deterministic conditioning extraction; the FPS seed is derived from
/// the instance id so re-preparation is exact.
pub fn prepare_instance<E: TextEncoder>(
    instance: &Instance,
    encoder: &E,
    cfg: &ModelConfig,
) -> Result<PreparedInstance, DiffusionError> {
    let text_emb = encoder.encode(&instance.instruction)?;
    let fps_seed = stable_hash(&instance.id);
    let clouds = instance
        .clouds
        .iter()
        .enumerate()
        .map(|(k, c)| farthest_point_sample(c, cfg.n_points, fps_seed.wrapping_add(k as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let ws = instance.initial_scene.workspace;
    let roles: Vec<Role> = instance.initial_scene.objects.iter().map(|o| o.role).collect();
    let pose_vecs: Vec<[f64; 9]> = instance
        .initial_scene
        .objects
        .iter()
        .map(|o| pose_to_vector(&o.pose, &ws))
        .collect();
    let goal_vec = pose_to_vector(
        &instance.goal_scene.objects[instance.movable_index].pose,
        &ws,
    );
    Ok(PreparedInstance {
        text_emb,
        camera: instance.initial_scene.camera,
        clouds,
        roles,
        pose_vecs,
        goal_vec,
        movable_index: instance.movable_index,
        workspace: ws,
    })
}

/// One forward pass: ε̂ as a (1 x 9) graph node. `cached_clouds` bypasses
/// the cloud encoder with precomputed embeddings (the sampler's hot loop
/// re-runs everything else each step while clouds never change).
pub fn predict_eps(
    g: &mut Graph,
    binder: &mut Binder,
    cfg: &ModelConfig,
    prep: &PreparedInstance,
    x_t: &[f64; 9],
    t: usize,
    cached_clouds: Option<&[Array2<f64>]>,
) -> Result<TensorId, NnError> {
    let mut objects = Vec::with_capacity(prep.roles.len());
    for (i, &role) in prep.roles.iter().enumerate() {
        let cloud_content = match cached_clouds {
            Some(cache) => g.leaf(cache[i].clone()),
            None => encode_object_cloud(g, binder, cfg, &prep.clouds[i])?,
        };
        let pose_vec = if role == Role::Movable { *x_t } else { prep.pose_vecs[i] };
        objects.push(ObjectTokenInput { cloud_content, pose_vec, role });
    }
    let seq = assemble_tokens(g, binder, cfg, &prep.text_emb, &prep.camera, &objects, t)?;
    let movable_row = seq.movable_row.expect("scene has a movable object");
    let h = backbone(g, binder, cfg, seq.tokens)?;
    let row = g.slice_rows(h, movable_row, movable_row + 1);
    let w = binder.param(g, "head.w");
    let b = binder.param(g, "head.b");
    let out = g.matmul(row, w)?;
    g.add_row(out, b)
}

/// Per-instance noise draw for one training step.
#[derive(Debug, Clone)]
pub struct NoiseDraw {
    pub t: usize,
    pub eps: [f64; 9],
    pub x_t: [f64; 9],
}

pub fn gaussian9(rng: &mut ChaCha12Rng) -> [f64; 9] {
    let mut v = [0.0; 9];
    for x in &mut v {
        *x = rng.sample(StandardNormal);
    }
    v
}

/// Samples (t, ε, x_t) per instance; kept outside the loss builder so one
/// draw can be re-evaluated for gradient checks.
pub fn draw_batch_noise(
    schedule: &NoiseSchedule,
    batch: &[PreparedInstance],
    rng: &mut ChaCha12Rng,
) -> Result<Vec<NoiseDraw>, DiffusionError> {
    batch
        .iter()
        .map(|prep| {
            let t = rng.gen_range(1..=schedule.t_steps());
            let eps = gaussian9(rng);
            let x_t = forward_noise(schedule, &prep.goal_vec, t, &eps)?;
            Ok(NoiseDraw { t, eps, x_t })
        })
        .collect()
}

/// Mean over the batch of ‖ε − ε̂‖₁. Only the movable object's pose is
/// noised; every other token carries its initial pose, and the head is
/// read at the movable token only.
pub fn batch_loss(
    g: &mut Graph,
    binder: &mut Binder,
    cfg: &ModelConfig,
    batch: &[PreparedInstance],
    noise: &[NoiseDraw],
) -> Result<TensorId, NnError> {
    assert_eq!(batch.len(), noise.len());
    let mut per_instance = Vec::with_capacity(batch.len());
    for (prep, draw) in batch.iter().zip(noise) {
        let eps_hat = predict_eps(g, binder, cfg, prep, &draw.x_t, draw.t, None)?;
        let target = g.leaf(Array2::from_shape_vec((1, 9), draw.eps.to_vec()).unwrap());
        let diff = g.sub(eps_hat, target)?;
        let l1 = g.abs(diff);
        per_instance.push(g.sum(l1));
    }
    let stacked = g.concat_rows(&per_instance)?;
    Ok(g.mean(stacked))
}

/// Numeric (out-of-graph) cloud embeddings for the sampler's cache.
pub fn cloud_embedding_cache(
    store: &ParameterStore,
    cfg: &ModelConfig,
    prep: &PreparedInstance,
) -> Result<Vec<Array2<f64>>, NnError> {
    let mut g = Graph::new();
    let mut binder = Binder::new(store);
    prep.clouds
        .iter()
        .map(|c| {
            let id = encode_object_cloud(&mut g, &mut binder, cfg, c)?;
            Ok(g.value(id).clone())
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct SampleOptions {
    /// Use the update denominator exactly as the source formula prints it
    /// (√(1−α_t)); off means the standard √(1−ᾱ_t).
    pub strict_paper_update: bool,
    pub max_retries: usize,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions { strict_paper_update: false, max_retries: 5 }
    }
}

/// Reverse diffusion for the movable object's goal pose. Retries with a
/// fresh seed stream when the decoded rotation is degenerate.
pub fn sample(
    store: &ParameterStore,
    cfg: &ModelConfig,
    schedule: &NoiseSchedule,
    prep: &PreparedInstance,
    seed: u64,
    opts: &SampleOptions,
) -> Result<(Pose, [f64; 9]), DiffusionError> {
    let cache = cloud_embedding_cache(store, cfg, prep)?;
    for attempt in 0..opts.max_retries {
        let mut rng = derive_rng(seed, "sample", attempt as u64);
        let x0 = sample_trajectory(store, cfg, schedule, prep, &cache, opts, &mut rng)?;
        match vector_to_pose(&x0, &prep.workspace) {
            Ok(pose) => return Ok((pose, x0)),
            Err(_) => continue,
        }
    }
    Err(DiffusionError::SamplingDegenerate { retries: opts.max_retries })
}

fn sample_trajectory(
    store: &ParameterStore,
    cfg: &ModelConfig,
    schedule: &NoiseSchedule,
    prep: &PreparedInstance,
    cache: &[Array2<f64>],
    opts: &SampleOptions,
    rng: &mut ChaCha12Rng,
) -> Result<[f64; 9], DiffusionError> {
    let mut x = gaussian9(rng);
    for t in (1..=schedule.t_steps()).rev() {
        let mut g = Graph::new();
        let mut binder = Binder::new(store);
        let eps_hat_id = predict_eps(&mut g, &mut binder, cfg, prep, &x, t, Some(cache))?;
        let eps_hat = g.value(eps_hat_id);

        let alpha = schedule.alpha(t);
        let denom = if opts.strict_paper_update {
            (1.0 - alpha).sqrt()
        } else {
            (1.0 - schedule.alpha_bar(t)).sqrt()
        };
        let coef = (1.0 - alpha) / denom;
        let inv_sqrt_alpha = 1.0 / alpha.sqrt();
        let z = if t > 1 { gaussian9(rng) } else { [0.0; 9] };
        let sigma = schedule.sigma(t);
        for i in 0..9 {
            x[i] = inv_sqrt_alpha * (x[i] - coef * eps_hat[(0, i)]) + sigma * z[i];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(DiffusionError::SamplingDegenerate { retries: 0 });
        }
    }
    Ok(x)
}
