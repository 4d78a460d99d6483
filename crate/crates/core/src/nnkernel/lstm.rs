use super::{KernelError, Matrix, ParamTensor, Parameters, Result};

/// Gate block offsets within the stacked `4·hidden` pre-activations.
pub const GATE_INPUT: usize = 0;
pub const GATE_FORGET: usize = 1;
pub const GATE_OUTPUT: usize = 2;
pub const GATE_CELL: usize = 3;

/// Weights of one LSTM layer, gates stacked as `[input; forget; output; cell]`.
/// `w` is `4h × input_dim`, `u` is `4h × h`, `b` is `4h × 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w: ParamTensor,
    pub u: ParamTensor,
    pub b: ParamTensor,
    input_dim: usize,
    hidden_dim: usize,
}

impl LstmParams {
    pub fn new(prefix: &str, w: Matrix, u: Matrix, b: Matrix) -> Result<Self> {
        let hidden_dim = u.cols();
        let input_dim = w.cols();
        let g = 4 * hidden_dim;
        if w.rows() != g || u.rows() != g || b.shape() != (g, 1) {
            return Err(KernelError::Shape(format!(
                "lstm weights {:?}/{:?}/{:?} inconsistent with hidden {hidden_dim}",
                w.shape(),
                u.shape(),
                b.shape()
            )));
        }
        Ok(Self {
            w: ParamTensor::new(format!("{prefix}.w"), w),
            u: ParamTensor::new(format!("{prefix}.u"), u),
            b: ParamTensor::new(format!("{prefix}.b"), b),
            input_dim,
            hidden_dim,
        })
    }

    pub fn zeros(prefix: &str, input_dim: usize, hidden_dim: usize) -> Self {
        let g = 4 * hidden_dim;
        Self::new(
            prefix,
            Matrix::zeros(g, input_dim),
            Matrix::zeros(g, hidden_dim),
            Matrix::zeros(g, 1),
        )
        .expect("shapes are consistent by construction")
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }
}

impl Parameters for LstmParams {
    fn tensors(&self) -> Vec<&ParamTensor> {
        vec![&self.w, &self.u, &self.b]
    }
    fn tensors_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.w, &mut self.u, &mut self.b]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        Self {
            h: vec![0.0; hidden_dim],
            c: vec![0.0; hidden_dim],
        }
    }
}

/// Everything the backward pass of one cell step needs.
#[derive(Debug, Clone)]
pub struct LstmCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates, same stacking as the weights.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn lstm_cell_forward(x: &[f64], state: &LstmState, p: &LstmParams) -> Result<(LstmState, LstmCache)> {
    let hd = p.hidden_dim;
    if x.len() != p.input_dim || state.h.len() != hd || state.c.len() != hd {
        return Err(KernelError::Shape(format!(
            "lstm input {} / state {} for params {}x{}",
            x.len(),
            state.h.len(),
            p.input_dim,
            hd
        )));
    }
    let mut z = p.b.value.as_slice().to_vec();
    p.w.value.matvec_acc(x, &mut z);
    p.u.value.matvec_acc(&state.h, &mut z);
    for (k, v) in z.iter_mut().enumerate() {
        *v = if k / hd == GATE_CELL { v.tanh() } else { sigmoid(*v) };
    }
    let gate = |g: usize, j: usize| z[g * hd + j];
    let mut c = vec![0.0; hd];
    let mut h = vec![0.0; hd];
    let mut tanh_c = vec![0.0; hd];
    for j in 0..hd {
        c[j] = gate(GATE_FORGET, j) * state.c[j] + gate(GATE_INPUT, j) * gate(GATE_CELL, j);
        tanh_c[j] = c[j].tanh();
        h[j] = gate(GATE_OUTPUT, j) * tanh_c[j];
    }
    let cache = LstmCache {
        x: x.to_vec(),
        h_prev: state.h.clone(),
        c_prev: state.c.clone(),
        gates: z,
        tanh_c,
    };
    Ok((LstmState { h, c }, cache))
}

/// Backward pass of one cell step. Accumulates parameter gradients into
/// `p` and returns `(dx, dh_prev, dc_prev)`.
pub fn lstm_cell_backward(
    cache: &LstmCache,
    p: &mut LstmParams,
    dh: &[f64],
    dc_next: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let hd = p.hidden_dim;
    let gate = |g: usize, j: usize| cache.gates[g * hd + j];
    let mut dz = vec![0.0; 4 * hd];
    let mut dc_prev = vec![0.0; hd];
    for j in 0..hd {
        let (i, f, o, g) = (
            gate(GATE_INPUT, j),
            gate(GATE_FORGET, j),
            gate(GATE_OUTPUT, j),
            gate(GATE_CELL, j),
        );
        let tc = cache.tanh_c[j];
        let d_o = dh[j] * tc;
        let dc = dc_next[j] + dh[j] * o * (1.0 - tc * tc);
        dz[GATE_INPUT * hd + j] = dc * g * i * (1.0 - i);
        dz[GATE_FORGET * hd + j] = dc * cache.c_prev[j] * f * (1.0 - f);
        dz[GATE_OUTPUT * hd + j] = d_o * o * (1.0 - o);
        dz[GATE_CELL * hd + j] = dc * i * (1.0 - g * g);
        dc_prev[j] = dc * f;
    }
    p.w.grad.add_outer(&dz, &cache.x);
    p.u.grad.add_outer(&dz, &cache.h_prev);
    p.b.grad.add_to_column(&dz);
    let mut dx = vec![0.0; p.input_dim];
    p.w.value.matvec_t_acc(&dz, &mut dx);
    let mut dh_prev = vec![0.0; hd];
    p.u.value.matvec_t_acc(&dz, &mut dh_prev);
    (dx, dh_prev, dc_prev)
}

#[cfg(test)]
mod tests {
    use super::super::{gradient_check, init_uniform, GradCheckOptions};
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_zero_state() {
        let p = LstmParams::zeros("l", 3, 2);
        let (s, _) = lstm_cell_forward(&[0.5, -1.0, 2.0], &LstmState::zeros(2), &p).unwrap();
        assert_eq!(s.h, vec![0.0, 0.0]);
        assert_eq!(s.c, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_params_unit_cell() {
        let p = LstmParams::zeros("l", 1, 1);
        let state = LstmState {
            h: vec![0.0],
            c: vec![1.0],
        };
        let (s, _) = lstm_cell_forward(&[0.7], &state, &p).unwrap();
        // f = 0.5, i*g = 0, o = 0.5
        assert_eq!(s.c, vec![0.5]);
        assert_abs_diff_eq!(s.h[0], 0.5 * 0.5f64.tanh(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.h[0], 0.231059, epsilon = 1e-6);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let p = LstmParams::zeros("l", 3, 2);
        assert!(lstm_cell_forward(&[0.0; 2], &LstmState::zeros(2), &p).is_err());
        assert!(LstmParams::new("l", Matrix::zeros(8, 3), Matrix::zeros(8, 3), Matrix::zeros(8, 1)).is_err());
    }

    fn random_instance(
        seed: u64,
        input: usize,
        hidden: usize,
    ) -> (LstmParams, Vec<f64>, LstmState, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = 4 * hidden;
        let p = LstmParams::new(
            "l",
            init_uniform(g, input, 0.5, &mut rng).unwrap(),
            init_uniform(g, hidden, 0.5, &mut rng).unwrap(),
            init_uniform(g, 1, 0.5, &mut rng).unwrap(),
        )
        .unwrap();
        let mut v = |n: usize| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        let x = v(input);
        let state = LstmState {
            h: v(hidden),
            c: v(hidden),
        };
        let rh = v(hidden);
        let rc = v(hidden);
        (p, x, state, rh, rc)
    }

    // Scalar probe: L = rh·h' + rc·c'
    fn probe(p: &LstmParams, x: &[f64], s: &LstmState, rh: &[f64], rc: &[f64]) -> f64 {
        let (n, _) = lstm_cell_forward(x, s, p).unwrap();
        super::super::dot(rh, &n.h) + super::super::dot(rc, &n.c)
    }

    #[test]
    fn backward_matches_finite_differences_for_params() {
        for seed in 0..5 {
            let (mut p, x, s, rh, rc) = random_instance(seed, 4, 4);
            let (_, cache) = lstm_cell_forward(&x, &s, &p).unwrap();
            lstm_cell_backward(&cache, &mut p, &rh, &rc);
            let report = gradient_check(
                &mut p,
                |p: &LstmParams| probe(p, &x, &s, &rh, &rc),
                &GradCheckOptions::exhaustive(),
            )
            .unwrap();
            assert!(report.max_relative_error < 1e-4, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn backward_matches_finite_differences_for_inputs() {
        let (mut p, x, s, rh, rc) = random_instance(11, 3, 5);
        let (_, cache) = lstm_cell_forward(&x, &s, &p).unwrap();
        let (dx, dh, dc) = lstm_cell_backward(&cache, &mut p, &rh, &rc);
        let eps = 1e-5;
        let check = |analytic: &[f64], perturb: &dyn Fn(usize, f64) -> f64| {
            for (k, a) in analytic.iter().enumerate() {
                let n = (perturb(k, eps) - perturb(k, -eps)) / (2.0 * eps);
                let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-12);
                assert!(rel < 1e-4, "entry {k}: analytic {a} numeric {n}");
            }
        };
        check(&dx, &|k, e| {
            let mut x2 = x.clone();
            x2[k] += e;
            probe(&p, &x2, &s, &rh, &rc)
        });
        check(&dh, &|k, e| {
            let mut s2 = s.clone();
            s2.h[k] += e;
            probe(&p, &x, &s2, &rh, &rc)
        });
        check(&dc, &|k, e| {
            let mut s2 = s.clone();
            s2.c[k] += e;
            probe(&p, &x, &s2, &rh, &rc)
        });
    }
}
