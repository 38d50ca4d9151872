//! Gated recurrent cells with hand-written backward passes. The parameter
//! block of one cell is a contiguous slice with a fixed gate layout, so the
//! optimizer and checkpoint code can treat the whole network as one flat
//! vector.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellKind {
    Gru,
    Lstm,
}

impl CellKind {
    pub fn gates(&self) -> usize {
        match self {
            CellKind::Gru => 3,
            CellKind::Lstm => 4,
        }
    }

    pub fn gate_names(&self) -> &'static [&'static str] {
        match self {
            CellKind::Gru => &["z", "r", "h"],
            CellKind::Lstm => &["i", "f", "o", "g"],
        }
    }
}

/// Shape of one direction's parameter block: per gate an input matrix W
/// (hidden×input), a recurrent matrix U (hidden×hidden) and a bias.
#[derive(Clone, Copy, Debug)]
pub struct CellLayout {
    pub kind: CellKind,
    pub input_dim: usize,
    pub hidden: usize,
}

impl CellLayout {
    pub fn param_len(&self) -> usize {
        let g = self.kind.gates();
        g * (self.hidden * self.input_dim + self.hidden * self.hidden + self.hidden)
    }

    #[inline]
    pub fn w(&self, gate: usize) -> (usize, usize) {
        let sz = self.hidden * self.input_dim;
        (gate * sz, sz)
    }

    #[inline]
    pub fn u(&self, gate: usize) -> (usize, usize) {
        let g = self.kind.gates();
        let base = g * self.hidden * self.input_dim;
        let sz = self.hidden * self.hidden;
        (base + gate * sz, sz)
    }

    #[inline]
    pub fn b(&self, gate: usize) -> (usize, usize) {
        let g = self.kind.gates();
        let base = g * (self.hidden * self.input_dim + self.hidden * self.hidden);
        (base + gate * self.hidden, self.hidden)
    }
}

/// y += M·x for a row-major rows×cols matrix slice.
fn matvec_acc(m: &[f64], rows: usize, cols: usize, x: &[f64], y: &mut [f64]) {
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(x.iter()) {
            acc += a * b;
        }
        y[r] += acc;
    }
}

/// x += M'·y (transposed accumulate).
fn matvec_t_acc(m: &[f64], rows: usize, cols: usize, y: &[f64], x: &mut [f64]) {
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        let g = y[r];
        if g == 0.0 {
            continue;
        }
        for (out, &a) in x.iter_mut().zip(row.iter()) {
            *out += g * a;
        }
    }
}

/// M += dy·x' (outer-product accumulate).
fn outer_acc(m: &mut [f64], rows: usize, cols: usize, dy: &[f64], x: &[f64]) {
    for r in 0..rows {
        let g = dy[r];
        if g == 0.0 {
            continue;
        }
        let row = &mut m[r * cols..(r + 1) * cols];
        for (out, &v) in row.iter_mut().zip(x.iter()) {
            *out += g * v;
        }
    }
}

/// Activations cached by one time step for the backward pass.
#[derive(Clone, Debug)]
pub struct StepCache {
    /// Post-nonlinearity gate values, `gates()` vectors of length `hidden`.
    pub gates: Vec<Vec<f64>>,
    pub h_prev: Vec<f64>,
    /// LSTM only: previous and current cell state.
    pub c_prev: Vec<f64>,
    pub c_new: Vec<f64>,
}

/// One forward step; returns the new hidden state and the cache.
pub fn step_forward(
    layout: &CellLayout,
    params: &[f64],
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> (Vec<f64>, Vec<f64>, StepCache) {
    let h = layout.hidden;
    let d = layout.input_dim;
    let g = layout.kind.gates();
    let mut pre = vec![vec![0.0; h]; g];
    for gate in 0..g {
        let (wo, _) = layout.w(gate);
        let (uo, _) = layout.u(gate);
        let (bo, _) = layout.b(gate);
        pre[gate].copy_from_slice(&params[bo..bo + h]);
        matvec_acc(&params[wo..wo + h * d], h, d, x, &mut pre[gate]);
        if gate == 2 && layout.kind == CellKind::Gru {
            // The candidate gate sees the reset-scaled previous state.
            let r = &preactivated_sigmoid(&pre[1]);
            let gated: Vec<f64> = r.iter().zip(h_prev.iter()).map(|(a, b)| a * b).collect();
            matvec_acc(&params[uo..uo + h * h], h, h, &gated, &mut pre[gate]);
        } else {
            matvec_acc(&params[uo..uo + h * h], h, h, h_prev, &mut pre[gate]);
        }
    }

    match layout.kind {
        CellKind::Gru => {
            let z: Vec<f64> = pre[0].iter().map(|&a| math::sigmoid(a)).collect();
            let r: Vec<f64> = pre[1].iter().map(|&a| math::sigmoid(a)).collect();
            let cand: Vec<f64> = pre[2].iter().map(|&a| math::tanh(a)).collect();
            let h_new: Vec<f64> = (0..h)
                .map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * cand[i])
                .collect();
            let cache = StepCache {
                gates: vec![z, r, cand],
                h_prev: h_prev.to_vec(),
                c_prev: Vec::new(),
                c_new: Vec::new(),
            };
            (h_new, Vec::new(), cache)
        }
        CellKind::Lstm => {
            let i: Vec<f64> = pre[0].iter().map(|&a| math::sigmoid(a)).collect();
            let f: Vec<f64> = pre[1].iter().map(|&a| math::sigmoid(a)).collect();
            let o: Vec<f64> = pre[2].iter().map(|&a| math::sigmoid(a)).collect();
            let gg: Vec<f64> = pre[3].iter().map(|&a| math::tanh(a)).collect();
            let c_new: Vec<f64> = (0..h)
                .map(|j| f[j] * c_prev[j] + i[j] * gg[j])
                .collect();
            let h_new: Vec<f64> = (0..h).map(|j| o[j] * math::tanh(c_new[j])).collect();
            let cache = StepCache {
                gates: vec![i, f, o, gg],
                h_prev: h_prev.to_vec(),
                c_prev: c_prev.to_vec(),
                c_new: c_new.clone(),
            };
            (h_new, c_new, cache)
        }
    }
}

// The GRU candidate preactivation needs sigmoid(r) before r is finalized;
// this applies sigmoid without consuming the preactivation buffer.
fn preactivated_sigmoid(pre: &[f64]) -> Vec<f64> {
    pre.iter().map(|&a| math::sigmoid(a)).collect()
}

/// Gradients flowing out of one backward step.
pub struct StepGrads {
    pub dx: Vec<f64>,
    pub dh_prev: Vec<f64>,
    pub dc_prev: Vec<f64>,
}

/// One backward step. `dh` is the total gradient on the step's hidden
/// output, `dc_next` the carried LSTM cell-state gradient (empty for GRU).
/// Parameter gradients accumulate into `dparams` (same layout as `params`).
pub fn step_backward(
    layout: &CellLayout,
    params: &[f64],
    dparams: &mut [f64],
    cache: &StepCache,
    x: &[f64],
    dh: &[f64],
    dc_next: &[f64],
) -> StepGrads {
    let h = layout.hidden;
    let d = layout.input_dim;
    let mut dx = vec![0.0; d];
    let mut dh_prev = vec![0.0; h];

    match layout.kind {
        CellKind::Gru => {
            let (z, r, cand) = (&cache.gates[0], &cache.gates[1], &cache.gates[2]);
            let hp = &cache.h_prev;
            let mut daz = vec![0.0; h];
            let mut dar = vec![0.0; h];
            let mut dac = vec![0.0; h];
            for i in 0..h {
                let dz = dh[i] * (cand[i] - hp[i]);
                let dcand = dh[i] * z[i];
                dh_prev[i] += dh[i] * (1.0 - z[i]);
                daz[i] = dz * z[i] * (1.0 - z[i]);
                dac[i] = dcand * (1.0 - cand[i] * cand[i]);
            }
            let gated: Vec<f64> = r.iter().zip(hp.iter()).map(|(a, b)| a * b).collect();
            let (uo_c, _) = layout.u(2);
            let mut dgated = vec![0.0; h];
            matvec_t_acc(&params[uo_c..uo_c + h * h], h, h, &dac, &mut dgated);
            for i in 0..h {
                let dr = dgated[i] * hp[i];
                dh_prev[i] += dgated[i] * r[i];
                dar[i] = dr * r[i] * (1.0 - r[i]);
            }
            for (gate, da) in [(0usize, &daz), (1, &dar), (2, &dac)] {
                let (wo, _) = layout.w(gate);
                let (uo, _) = layout.u(gate);
                let (bo, _) = layout.b(gate);
                outer_acc(&mut dparams[wo..wo + h * d], h, d, da, x);
                if gate == 2 {
                    outer_acc(&mut dparams[uo..uo + h * h], h, h, da, &gated);
                } else {
                    outer_acc(&mut dparams[uo..uo + h * h], h, h, da, hp);
                    matvec_t_acc(&params[uo..uo + h * h], h, h, da, &mut dh_prev);
                }
                for (b, &g) in dparams[bo..bo + h].iter_mut().zip(da.iter()) {
                    *b += g;
                }
                matvec_t_acc(&params[wo..wo + h * d], h, d, da, &mut dx);
            }
            StepGrads {
                dx,
                dh_prev,
                dc_prev: Vec::new(),
            }
        }
        CellKind::Lstm => {
            let (gi, gf, go, gg) = (
                &cache.gates[0],
                &cache.gates[1],
                &cache.gates[2],
                &cache.gates[3],
            );
            let hp = &cache.h_prev;
            let mut dc = vec![0.0; h];
            let mut das = vec![vec![0.0; h]; 4];
            let mut dc_prev = vec![0.0; h];
            for j in 0..h {
                let tc = math::tanh(cache.c_new[j]);
                let do_ = dh[j] * tc;
                dc[j] = dh[j] * go[j] * (1.0 - tc * tc);
                if !dc_next.is_empty() {
                    dc[j] += dc_next[j];
                }
                let di = dc[j] * gg[j];
                let df = dc[j] * cache.c_prev[j];
                let dg = dc[j] * gi[j];
                dc_prev[j] = dc[j] * gf[j];
                das[0][j] = di * gi[j] * (1.0 - gi[j]);
                das[1][j] = df * gf[j] * (1.0 - gf[j]);
                das[2][j] = do_ * go[j] * (1.0 - go[j]);
                das[3][j] = dg * (1.0 - gg[j] * gg[j]);
            }
            for (gate, da) in das.iter().enumerate() {
                let (wo, _) = layout.w(gate);
                let (uo, _) = layout.u(gate);
                let (bo, _) = layout.b(gate);
                outer_acc(&mut dparams[wo..wo + h * d], h, d, da, x);
                outer_acc(&mut dparams[uo..uo + h * h], h, h, da, hp);
                for (b, &g) in dparams[bo..bo + h].iter_mut().zip(da.iter()) {
                    *b += g;
                }
                matvec_t_acc(&params[wo..wo + h * d], h, d, da, &mut dx);
                matvec_t_acc(&params[uo..uo + h * h], h, h, da, &mut dh_prev);
            }
            StepGrads {
                dx,
                dh_prev,
                dc_prev,
            }
        }
    }
}
