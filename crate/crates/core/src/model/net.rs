//! The embedding network: stacked bidirectional recurrent layers over the
//! time axis followed by one dense head that maps each frame's state to the
//! embeddings of all frequency bins of that frame. The output is an L×K
//! matrix whose row order matches the mask vectorization (bin fastest).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid_config, invalid_input, Result};
use crate::mat::Mat;
use crate::math;

use super::cell::{step_backward, step_forward, CellKind, CellLayout, StepCache};

/// Norm floor under which row normalization degrades to a fixed scaling.
const ROW_NORM_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetConfig {
    /// Frequency bins per frame (input width F).
    pub in_features: usize,
    /// Hidden units per direction.
    pub hidden: usize,
    /// Embedding dimension K.
    pub embed_dim: usize,
    /// Stacked bidirectional layers.
    pub layers: usize,
    pub cell: CellKind,
    /// Dropout rate on the final recurrent layer's output (train mode only).
    pub dropout: f64,
    /// L2-normalize each embedding row.
    pub row_normalize: bool,
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_features == 0 || self.hidden == 0 || self.embed_dim == 0 || self.layers == 0 {
            return Err(invalid_config!("network dimensions must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(invalid_config!("dropout must lie in [0, 1)"));
        }
        Ok(())
    }

    fn layer_layout(&self, layer: usize) -> CellLayout {
        CellLayout {
            kind: self.cell,
            input_dim: if layer == 0 {
                self.in_features
            } else {
                2 * self.hidden
            },
            hidden: self.hidden,
        }
    }

    fn dense_rows(&self) -> usize {
        self.in_features * self.embed_dim
    }

    fn dense_cols(&self) -> usize {
        2 * self.hidden
    }
}

/// Offset table entry for one named parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorSpec {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Clone, Debug)]
pub struct EmbeddingNetwork {
    cfg: NetConfig,
    params: Vec<f64>,
}

/// Everything the backward pass needs from a train-mode forward.
pub struct ForwardCache {
    /// Input to each layer, T×D.
    layer_inputs: Vec<Mat>,
    /// Per layer: forward- and backward-direction step caches in processing
    /// order.
    dir_caches: Vec<[Vec<StepCache>; 2]>,
    /// Inverted dropout mask over the final layer output, if active.
    dropout_mask: Option<Mat>,
    /// Dense-head input after dropout, T×2H.
    dense_input: Mat,
    /// Pre-normalization row norms (row_normalize only).
    row_norms: Option<Vec<f64>>,
    /// The network output (normalized when enabled), L×K.
    pub embedding: Mat,
    frames: usize,
}

impl EmbeddingNetwork {
    /// Uniform init at 1/sqrt(fan_in); biases zero except the LSTM forget
    /// gate, which starts at one.
    pub fn init(cfg: NetConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        let mut net = EmbeddingNetwork {
            cfg,
            params: vec![0.0; param_count(&cfg)],
        };
        for spec in net.param_layout() {
            let slice = &mut net.params[spec.offset..spec.offset + spec.len()];
            if spec.cols == 1 {
                // Biases start at zero, except the LSTM forget gate.
                if cfg.cell == CellKind::Lstm && spec.name.ends_with(".bf") {
                    slice.fill(1.0);
                }
                continue;
            }
            let bound = 1.0 / math::sqrt(spec.cols as f64);
            for v in slice.iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn from_params(cfg: NetConfig, params: Vec<f64>) -> Result<Self> {
        cfg.validate()?;
        if params.len() != param_count(&cfg) {
            return Err(invalid_input!(
                "parameter vector has {} entries, config implies {}",
                params.len(),
                param_count(&cfg)
            ));
        }
        Ok(EmbeddingNetwork { cfg, params })
    }

    /// Named tensors in flat-vector order.
    pub fn param_layout(&self) -> Vec<TensorSpec> {
        layout_for(&self.cfg)
    }

    /// Run the network over `features` (T frames × F bins). Train mode
    /// caches activations and applies dropout using `dropout_rng`.
    pub fn forward(
        &self,
        features: &Mat,
        mode: Mode,
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Mat, Option<ForwardCache>)> {
        let t = features.rows();
        if features.cols() != self.cfg.in_features {
            return Err(invalid_input!(
                "features have {} columns, network expects {}",
                features.cols(),
                self.cfg.in_features
            ));
        }
        if t == 0 {
            return Err(invalid_input!("features must contain at least one frame"));
        }
        if !features.is_finite() {
            return Err(invalid_input!("features contain non-finite values"));
        }

        let h = self.cfg.hidden;
        let mut layer_inputs: Vec<Mat> = vec![features.clone()];
        let mut dir_caches: Vec<[Vec<StepCache>; 2]> = Vec::new();

        for layer in 0..self.cfg.layers {
            let layout = self.cfg.layer_layout(layer);
            let (off, len) = self.layer_param_range(layer);
            let fwd_params = &self.params[off..off + len / 2];
            let bwd_params = &self.params[off + len / 2..off + len];
            let input = &layer_inputs[layer];

            let (out_f, cache_f) = run_direction(&layout, fwd_params, input, false);
            let (out_b, cache_b) = run_direction(&layout, bwd_params, input, true);
            let mut out = Mat::zeros(t, 2 * h);
            for step in 0..t {
                out.row_mut(step)[..h].copy_from_slice(out_f.row(step));
                out.row_mut(step)[h..].copy_from_slice(out_b.row(step));
            }
            dir_caches.push([cache_f, cache_b]);
            layer_inputs.push(out);
        }

        let mut dense_input = layer_inputs.last().unwrap().clone();
        let mut dropout_mask = None;
        if mode == Mode::Train && self.cfg.dropout > 0.0 {
            let rng = dropout_rng
                .ok_or_else(|| invalid_input!("train-mode forward needs a dropout stream"))?;
            let keep = 1.0 - self.cfg.dropout;
            let mut mask = Mat::zeros(t, 2 * h);
            for v in mask.as_mut_slice() {
                *v = if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 };
            }
            for (x, &m) in dense_input.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                *x *= m;
            }
            dropout_mask = Some(mask);
        }

        let (dw, db) = self.dense_ranges();
        let w = &self.params[dw.0..dw.0 + dw.1];
        let b = &self.params[db.0..db.0 + db.1];
        let rows = self.cfg.dense_rows();
        let cols = self.cfg.dense_cols();
        let f = self.cfg.in_features;
        let k = self.cfg.embed_dim;
        let mut v = Mat::zeros(t * f, k);
        for step in 0..t {
            let y = dense_input.row(step);
            for r in 0..rows {
                let wrow = &w[r * cols..(r + 1) * cols];
                let mut acc = b[r];
                for (a, c) in wrow.iter().zip(y.iter()) {
                    acc += a * c;
                }
                // r = bin*K + j maps to embedding row step*F + bin.
                v.row_mut(step * f + r / k)[r % k] = acc;
            }
        }

        let mut row_norms = None;
        if self.cfg.row_normalize {
            let mut norms = Vec::with_capacity(v.rows());
            for r in 0..v.rows() {
                let norm = math::sqrt(v.row(r).iter().map(|x| x * x).sum::<f64>());
                let scale = 1.0 / norm.max(ROW_NORM_FLOOR);
                for x in v.row_mut(r) {
                    *x *= scale;
                }
                norms.push(norm);
            }
            row_norms = Some(norms);
        }

        let cache = if mode == Mode::Train {
            Some(ForwardCache {
                layer_inputs,
                dir_caches,
                dropout_mask,
                dense_input,
                row_norms,
                embedding: v.clone(),
                frames: t,
            })
        } else {
            None
        };
        Ok((v, cache))
    }

    /// Backpropagate `d_embedding` (L×K) through the cached forward; returns
    /// the gradient for every parameter in flat-vector order.
    pub fn backward(&self, cache: &ForwardCache, d_embedding: &Mat) -> Result<Vec<f64>> {
        let t = cache.frames;
        let f = self.cfg.in_features;
        let k = self.cfg.embed_dim;
        let h = self.cfg.hidden;
        if d_embedding.rows() != t * f || d_embedding.cols() != k {
            return Err(invalid_input!("gradient shape disagrees with the cache"));
        }

        let mut dv = d_embedding.clone();
        if let Some(norms) = &cache.row_norms {
            for r in 0..dv.rows() {
                let norm = norms[r];
                let vhat = cache.embedding.row(r);
                let g = dv.row_mut(r);
                if norm > ROW_NORM_FLOOR {
                    let dot: f64 = vhat.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
                    for (gi, &vi) in g.iter_mut().zip(vhat.iter()) {
                        *gi = (*gi - vi * dot) / norm;
                    }
                } else {
                    for gi in g.iter_mut() {
                        *gi /= ROW_NORM_FLOOR;
                    }
                }
            }
        }

        let mut grads = vec![0.0; self.params.len()];
        let (dw, db) = self.dense_ranges();
        let rows = self.cfg.dense_rows();
        let cols = self.cfg.dense_cols();
        let w = &self.params[dw.0..dw.0 + dw.1];

        // Dense head backward, accumulating into the final-layer gradient.
        let mut d_final = Mat::zeros(t, 2 * h);
        {
            let (dw_slice, rest) = grads[dw.0..].split_at_mut(dw.1);
            let db_slice = &mut rest[..db.1];
            for step in 0..t {
                let y = cache.dense_input.row(step);
                let dy = d_final.row_mut(step);
                for r in 0..rows {
                    let g = dv.get(step * f + r / k, r % k);
                    if g == 0.0 {
                        continue;
                    }
                    db_slice[r] += g;
                    let wrow = &w[r * cols..(r + 1) * cols];
                    let dwrow = &mut dw_slice[r * cols..(r + 1) * cols];
                    for i in 0..cols {
                        dwrow[i] += g * y[i];
                        dy[i] += g * wrow[i];
                    }
                }
            }
        }

        if let Some(mask) = &cache.dropout_mask {
            for (g, &m) in d_final.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                *g *= m;
            }
        }

        // Layers, top down.
        let mut d_out = d_final;
        for layer in (0..self.cfg.layers).rev() {
            let layout = self.cfg.layer_layout(layer);
            let (off, len) = self.layer_param_range(layer);
            let input = &cache.layer_inputs[layer];
            let mut d_input = Mat::zeros(t, layout.input_dim);

            for (dir, reverse) in [(0usize, false), (1usize, true)] {
                let half = len / 2;
                let p_off = off + dir * half;
                let params = &self.params[p_off..p_off + half];
                let mut d_dir = Mat::zeros(t, h);
                for step in 0..t {
                    let src = &d_out.row(step)[dir * h..(dir + 1) * h];
                    d_dir.row_mut(step).copy_from_slice(src);
                }
                let caches = &cache.dir_caches[layer][dir];
                // Split-borrow the parameter-gradient slice for this block.
                let dparams_all = &mut grads;
                let (before, rest) = dparams_all.split_at_mut(p_off);
                let _ = before;
                let (dparams, _) = rest.split_at_mut(half);
                direction_backward(
                    &layout,
                    params,
                    dparams,
                    input,
                    caches,
                    &d_dir,
                    reverse,
                    &mut d_input,
                );
            }
            d_out = d_input;
        }
        Ok(grads)
    }

    /// Flat range of layer `layer`'s parameters (both directions).
    fn layer_param_range(&self, layer: usize) -> (usize, usize) {
        let mut off = 0;
        for l in 0..layer {
            off += 2 * self.cfg.layer_layout(l).param_len();
        }
        (off, 2 * self.cfg.layer_layout(layer).param_len())
    }

    /// Flat ranges of the dense weight and bias.
    fn dense_ranges(&self) -> ((usize, usize), (usize, usize)) {
        let mut off = 0;
        for l in 0..self.cfg.layers {
            off += 2 * self.cfg.layer_layout(l).param_len();
        }
        let wlen = self.cfg.dense_rows() * self.cfg.dense_cols();
        ((off, wlen), (off + wlen, self.cfg.dense_rows()))
    }
}

fn param_count(cfg: &NetConfig) -> usize {
    let mut n = 0;
    for l in 0..cfg.layers {
        n += 2 * cfg.layer_layout(l).param_len();
    }
    n + cfg.dense_rows() * cfg.dense_cols() + cfg.dense_rows()
}

fn layout_for(cfg: &NetConfig) -> Vec<TensorSpec> {
    let mut specs = Vec::new();
    let mut off = 0;
    for layer in 0..cfg.layers {
        let ll = cfg.layer_layout(layer);
        for dir in ["fwd", "bwd"] {
            for (gate, gname) in cfg.cell.gate_names().iter().enumerate() {
                let (wo, wl) = ll.w(gate);
                specs.push(TensorSpec {
                    name: alloc::format!("layer{layer}.{dir}.w{gname}"),
                    offset: off + wo,
                    rows: ll.hidden,
                    cols: ll.input_dim,
                });
                let _ = wl;
            }
            for (gate, gname) in cfg.cell.gate_names().iter().enumerate() {
                let (uo, _) = ll.u(gate);
                specs.push(TensorSpec {
                    name: alloc::format!("layer{layer}.{dir}.u{gname}"),
                    offset: off + uo,
                    rows: ll.hidden,
                    cols: ll.hidden,
                });
            }
            for (gate, gname) in cfg.cell.gate_names().iter().enumerate() {
                let (bo, _) = ll.b(gate);
                specs.push(TensorSpec {
                    name: alloc::format!("layer{layer}.{dir}.b{gname}"),
                    offset: off + bo,
                    rows: ll.hidden,
                    cols: 1,
                });
            }
            off += ll.param_len();
        }
    }
    let wlen = cfg.dense_rows() * cfg.dense_cols();
    specs.push(TensorSpec {
        name: String::from("dense.w"),
        offset: off,
        rows: cfg.dense_rows(),
        cols: cfg.dense_cols(),
    });
    specs.push(TensorSpec {
        name: String::from("dense.b"),
        offset: off + wlen,
        rows: cfg.dense_rows(),
        cols: 1,
    });
    specs
}

/// Run one direction over all frames; output rows are in time order.
fn run_direction(
    layout: &CellLayout,
    params: &[f64],
    input: &Mat,
    reverse: bool,
) -> (Mat, Vec<StepCache>) {
    let t = input.rows();
    let h = layout.hidden;
    let mut out = Mat::zeros(t, h);
    let mut caches = Vec::with_capacity(t);
    let mut h_state = vec![0.0; h];
    let mut c_state = vec![0.0; h];
    for step in 0..t {
        let time = if reverse { t - 1 - step } else { step };
        let (h_new, c_new, cache) =
            step_forward(layout, params, input.row(time), &h_state, &c_state);
        out.row_mut(time).copy_from_slice(&h_new);
        caches.push(cache);
        h_state = h_new;
        if layout.kind == CellKind::Lstm {
            c_state = c_new;
        }
    }
    (out, caches)
}

/// BPTT over one direction. `d_h_time` holds the output gradients in time
/// order; `d_input` accumulates gradients for the layer below.
#[allow(clippy::too_many_arguments)]
fn direction_backward(
    layout: &CellLayout,
    params: &[f64],
    dparams: &mut [f64],
    input: &Mat,
    caches: &[StepCache],
    d_h_time: &Mat,
    reverse: bool,
    d_input: &mut Mat,
) {
    let t = input.rows();
    let h = layout.hidden;
    let mut dh_carry = vec![0.0; h];
    let mut dc_carry: Vec<f64> = Vec::new();
    for step in (0..t).rev() {
        let time = if reverse { t - 1 - step } else { step };
        let mut dh = d_h_time.row(time).to_vec();
        for (a, &b) in dh.iter_mut().zip(dh_carry.iter()) {
            *a += b;
        }
        let grads = step_backward(
            layout,
            params,
            dparams,
            &caches[step],
            input.row(time),
            &dh,
            &dc_carry,
        );
        for (o, &g) in d_input.row_mut(time).iter_mut().zip(grads.dx.iter()) {
            *o += g;
        }
        dh_carry = grads.dh_prev;
        dc_carry = grads.dc_prev;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn tiny_cfg(cell: CellKind) -> NetConfig {
        NetConfig {
            in_features: 5,
            hidden: 4,
            embed_dim: 2,
            layers: 1,
            cell,
            dropout: 0.0,
            row_normalize: true,
        }
    }

    fn random_features(t: usize, f: usize, seed: u64) -> Mat {
        let mut rng = stream(seed, "features");
        let mut m = Mat::zeros(t, f);
        for v in m.as_mut_slice() {
            *v = rng.gen_range(-1.0..1.0);
        }
        m
    }

    #[test]
    fn output_shape_contract() {
        let cfg = tiny_cfg(CellKind::Gru);
        let mut rng = stream(1, "init");
        let net = EmbeddingNetwork::init(cfg, &mut rng).unwrap();
        let x = random_features(3, 5, 2);
        let (v, cache) = net.forward(&x, Mode::Infer, None).unwrap();
        assert_eq!(v.rows(), 15);
        assert_eq!(v.cols(), 2);
        assert!(cache.is_none());
    }

    #[test]
    fn zero_parameters_give_constant_rows() {
        let cfg = tiny_cfg(CellKind::Gru);
        let net = EmbeddingNetwork::from_params(cfg, vec![0.0; {
            let mut rng = stream(1, "init");
            EmbeddingNetwork::init(cfg, &mut rng).unwrap().num_params()
        }])
        .unwrap();
        let x = random_features(3, 5, 3);
        let (v, _) = net.forward(&x, Mode::Infer, None).unwrap();
        // Zero weights and biases: every row is the zero vector.
        assert!(v.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn infer_is_deterministic() {
        let cfg = tiny_cfg(CellKind::Lstm);
        let mut rng = stream(4, "init");
        let net = EmbeddingNetwork::init(cfg, &mut rng).unwrap();
        let x = random_features(4, 5, 5);
        let (a, _) = net.forward(&x, Mode::Infer, None).unwrap();
        let (b, _) = net.forward(&x, Mode::Infer, None).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn rows_are_unit_norm_when_enabled() {
        let cfg = tiny_cfg(CellKind::Gru);
        let mut rng = stream(6, "init");
        let net = EmbeddingNetwork::init(cfg, &mut rng).unwrap();
        let x = random_features(3, 5, 7);
        let (v, _) = net.forward(&x, Mode::Infer, None).unwrap();
        for r in 0..v.rows() {
            let norm: f64 = v.row(r).iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn param_layout_covers_the_vector_exactly() {
        for cell in [CellKind::Gru, CellKind::Lstm] {
            let cfg = NetConfig {
                layers: 2,
                ..tiny_cfg(cell)
            };
            let mut rng = stream(8, "init");
            let net = EmbeddingNetwork::init(cfg, &mut rng).unwrap();
            let layout = net.param_layout();
            let mut covered = vec![false; net.num_params()];
            for spec in &layout {
                for i in spec.offset..spec.offset + spec.len() {
                    assert!(!covered[i], "{} overlaps at {i}", spec.name);
                    covered[i] = true;
                }
            }
            assert!(covered.iter().all(|&c| c), "layout leaves gaps");
        }
    }

    #[test]
    fn backward_zero_gradient_gives_zero_parameter_gradients() {
        let cfg = tiny_cfg(CellKind::Gru);
        let mut rng = stream(9, "init");
        let net = EmbeddingNetwork::init(cfg, &mut rng).unwrap();
        let x = random_features(3, 5, 10);
        let (_, cache) = net.forward(&x, Mode::Train, Some(&mut stream(0, "drop"))).unwrap();
        let cache = cache.unwrap();
        let dv = Mat::zeros(15, 2);
        let grads = net.backward(&cache, &dv).unwrap();
        assert!(grads.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_is_linear_in_the_output_gradient() {
        let cfg = tiny_cfg(CellKind::Lstm);
        let mut rng = stream(11, "init");
        let net = EmbeddingNetwork::init(cfg, &mut rng).unwrap();
        let x = random_features(3, 5, 12);
        let (_, cache) = net.forward(&x, Mode::Train, Some(&mut stream(0, "drop"))).unwrap();
        let cache = cache.unwrap();
        let mut dv = Mat::zeros(15, 2);
        let mut r = stream(13, "dv");
        for v in dv.as_mut_slice() {
            *v = r.gen_range(-1.0..1.0);
        }
        let g1 = net.backward(&cache, &dv).unwrap();
        for v in dv.as_mut_slice() {
            *v *= 2.0;
        }
        let g2 = net.backward(&cache, &dv).unwrap();
        for (a, b) in g1.iter().zip(g2.iter()) {
            assert!((2.0 * a - b).abs() < 1e-9);
        }
    }

    /// Full-network gradient check through a scalar probe loss
    /// sum(V ⊙ P) with random P, for both cells.
    #[test]
    fn network_gradients_match_finite_differences() {
        for cell in [CellKind::Gru, CellKind::Lstm] {
            let cfg = NetConfig {
                in_features: 3,
                hidden: 3,
                embed_dim: 2,
                layers: 2,
                cell,
                dropout: 0.0,
                row_normalize: true,
            };
            let mut rng = stream(20, "init");
            let mut net = EmbeddingNetwork::init(cfg, &mut rng).unwrap();
            assert!(net.num_params() <= 500, "test net too large");
            let x = random_features(3, 3, 21);
            let mut probe = Mat::zeros(9, 2);
            let mut pr = stream(22, "probe");
            for v in probe.as_mut_slice() {
                *v = pr.gen_range(-1.0..1.0);
            }
            let loss_of = |net: &EmbeddingNetwork| -> f64 {
                let (v, _) = net.forward(&x, Mode::Infer, None).unwrap();
                v.as_slice()
                    .iter()
                    .zip(probe.as_slice().iter())
                    .map(|(a, b)| a * b)
                    .sum()
            };
            let (_, cache) = net.forward(&x, Mode::Train, Some(&mut stream(0, "d"))).unwrap();
            let grads = net.backward(&cache.unwrap(), &probe).unwrap();
            let h = 1e-5;
            let mut max_rel: f64 = 0.0;
            for i in 0..net.num_params() {
                let orig = net.params()[i];
                net.params_mut()[i] = orig + h;
                let up = loss_of(&net);
                net.params_mut()[i] = orig - h;
                let down = loss_of(&net);
                net.params_mut()[i] = orig;
                let fd = (up - down) / (2.0 * h);
                let rel = (fd - grads[i]).abs() / grads[i].abs().max(1e-4);
                max_rel = max_rel.max(rel);
            }
            assert!(max_rel < 1e-3, "{cell:?}: max rel {max_rel}");
        }
    }

    #[test]
    fn dropout_changes_train_output_but_not_infer() {
        let cfg = NetConfig {
            dropout: 0.5,
            ..tiny_cfg(CellKind::Gru)
        };
        let mut rng = stream(30, "init");
        let net = EmbeddingNetwork::init(cfg, &mut rng).unwrap();
        let x = random_features(4, 5, 31);
        let (infer, _) = net.forward(&x, Mode::Infer, None).unwrap();
        let (train, _) = net
            .forward(&x, Mode::Train, Some(&mut stream(1, "drop")))
            .unwrap();
        assert_ne!(infer.as_slice(), train.as_slice());
        let (infer2, _) = net.forward(&x, Mode::Infer, None).unwrap();
        assert_eq!(infer.as_slice(), infer2.as_slice());
    }
}
