//! Peephole LSTM encoder followed by a tanh projection and a dueling head,
//! with hand-written backpropagation through time.

use ndarray::{s, Array2, ArrayView2, Axis};

use crate::numerics::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkShape {
    /// Inputs per time step.
    pub inputs: usize,
    pub cells: usize,
    pub seq_len: usize,
    pub projection: usize,
    pub value_hidden: usize,
    pub advantage_hidden: usize,
    pub actions: usize,
}

impl NetworkShape {
    /// Weight count without bias terms:
    /// `4 N_i N_c + 4 N_c^2 + 3 N_c + N_c N_ol + N_ol (N_v + N_a) + N_v + N_a |A|`.
    pub fn weight_count(&self) -> usize {
        let (ni, nc, nol) = (self.inputs, self.cells, self.projection);
        let (nv, na, a) = (self.value_hidden, self.advantage_hidden, self.actions);
        4 * ni * nc + 4 * nc * nc + 3 * nc + nc * nol + nol * (nv + na) + nv + na * a
    }

    /// Total trainable parameters including biases.
    pub fn parameter_count(&self) -> usize {
        self.weight_count()
            + 4 * self.cells
            + self.projection
            + self.value_hidden
            + 1
            + self.advantage_hidden
            + self.actions
    }

    fn tensor_shapes(&self) -> [(usize, usize); 14] {
        let (ni, nc, nol) = (self.inputs, self.cells, self.projection);
        let (nv, na, a) = (self.value_hidden, self.advantage_hidden, self.actions);
        [
            (4 * nc, ni),
            (4 * nc, nc),
            (3, nc),
            (1, 4 * nc),
            (nol, nc),
            (1, nol),
            (nv, nol),
            (1, nv),
            (1, nv),
            (1, 1),
            (na, nol),
            (1, na),
            (a, na),
            (1, a),
        ]
    }

    fn fan_in(&self, tensor: usize) -> usize {
        let (ni, nc, nol) = (self.inputs, self.cells, self.projection);
        match tensor {
            0..=3 => ni + nc,
            4 | 5 => nc,
            6 | 7 | 10 | 11 => nol,
            8 | 9 => self.value_hidden,
            _ => self.advantage_hidden,
        }
    }

    pub fn state_len(&self) -> usize {
        self.inputs * self.seq_len
    }
}

/// All trainable tensors. Biases are stored as single-row matrices so they
/// broadcast over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// Input weights of the gates, stacked `[input, forget, cell, output]`.
    pub w_x: Array2<f64>,
    pub w_h: Array2<f64>,
    /// Peephole weights for the input, forget and output gates.
    pub peep: Array2<f64>,
    pub b_gates: Array2<f64>,
    pub w_proj: Array2<f64>,
    pub b_proj: Array2<f64>,
    pub w_v1: Array2<f64>,
    pub b_v1: Array2<f64>,
    pub w_v2: Array2<f64>,
    pub b_v2: Array2<f64>,
    pub w_a1: Array2<f64>,
    pub b_a1: Array2<f64>,
    pub w_a2: Array2<f64>,
    pub b_a2: Array2<f64>,
}

pub type Gradients = Params;

impl Params {
    pub fn zeros(shape: &NetworkShape) -> Self {
        let t = shape.tensor_shapes();
        let z = |i: usize| Array2::zeros(t[i]);
        Params {
            w_x: z(0),
            w_h: z(1),
            peep: z(2),
            b_gates: z(3),
            w_proj: z(4),
            b_proj: z(5),
            w_v1: z(6),
            b_v1: z(7),
            w_v2: z(8),
            b_v2: z(9),
            w_a1: z(10),
            b_a1: z(11),
            w_a2: z(12),
            b_a2: z(13),
        }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init(shape: &NetworkShape, rng: &mut Rng) -> Self {
        let mut p = Params::zeros(shape);
        for (i, t) in p.tensors_mut().into_iter().enumerate() {
            let bound = 1.0 / (shape.fan_in(i) as f64).sqrt();
            for x in t.iter_mut() {
                *x = rng.uniform_range(-bound, bound);
            }
        }
        p
    }

    pub fn tensors(&self) -> [&Array2<f64>; 14] {
        [
            &self.w_x,
            &self.w_h,
            &self.peep,
            &self.b_gates,
            &self.w_proj,
            &self.b_proj,
            &self.w_v1,
            &self.b_v1,
            &self.w_v2,
            &self.b_v2,
            &self.w_a1,
            &self.b_a1,
            &self.w_a2,
            &self.b_a2,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Array2<f64>; 14] {
        [
            &mut self.w_x,
            &mut self.w_h,
            &mut self.peep,
            &mut self.b_gates,
            &mut self.w_proj,
            &mut self.b_proj,
            &mut self.w_v1,
            &mut self.b_v1,
            &mut self.w_v2,
            &mut self.b_v2,
            &mut self.w_a1,
            &mut self.b_a1,
            &mut self.w_a2,
            &mut self.b_a2,
        ]
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter().copied())
            .collect()
    }

    pub fn from_flat(shape: &NetworkShape, flat: &[f64]) -> Result<Self> {
        let mut p = Params::zeros(shape);
        if flat.len() != p.len() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                p.len(),
                flat.len()
            )));
        }
        let mut it = flat.iter();
        for t in p.tensors_mut() {
            for (x, v) in t.iter_mut().zip(&mut it) {
                *x = *v;
            }
        }
        Ok(p)
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|t| t.iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, f: f64) {
        for t in self.tensors_mut() {
            t.mapv_inplace(|x| x * f);
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Params) {
        for (t, o) in self.tensors_mut().into_iter().zip(other.tensors()) {
            t.scaled_add(alpha, o);
        }
    }

    /// Mutable access to parameter `i` in flat order.
    pub fn get_mut(&mut self, mut i: usize) -> Option<&mut f64> {
        for t in self.tensors_mut() {
            if i < t.len() {
                return t.iter_mut().nth(i);
            }
            i -= t.len();
        }
        None
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    xs: Vec<Array2<f64>>,
    hs: Vec<Array2<f64>>,
    cs: Vec<Array2<f64>>,
    gi: Vec<Array2<f64>>,
    gf: Vec<Array2<f64>>,
    gg: Vec<Array2<f64>>,
    go: Vec<Array2<f64>>,
    u: Array2<f64>,
    v1: Array2<f64>,
    a1: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    shape: NetworkShape,
    pub params: Params,
}

impl QNetwork {
    pub fn new(shape: NetworkShape, rng: &mut Rng) -> Self {
        let params = Params::init(&shape, rng);
        QNetwork { shape, params }
    }

    pub fn from_params(shape: NetworkShape, params: Params) -> Result<Self> {
        if params.len() != shape.parameter_count() {
            return Err(Error::Shape(
                "parameters do not match the network shape".into(),
            ));
        }
        Ok(QNetwork { shape, params })
    }

    pub fn shape(&self) -> &NetworkShape {
        &self.shape
    }

    /// Q-values for a batch of flattened state sequences (one per row).
    pub fn forward(&self, states: ArrayView2<f64>) -> Array2<f64> {
        self.forward_cached(states).0
    }

    pub fn q_values(&self, state: &[f64]) -> Vec<f64> {
        let view = ArrayView2::from_shape((1, state.len()), state).expect("row view");
        self.forward(view).row(0).to_vec()
    }

    /// Arg-max action; ties go to the lowest index.
    pub fn greedy(&self, state: &[f64]) -> usize {
        argmax(&self.q_values(state))
    }

    pub fn forward_cached(&self, states: ArrayView2<f64>) -> (Array2<f64>, Cache) {
        let sh = &self.shape;
        let p = &self.params;
        let (b, nc, ni) = (states.nrows(), sh.cells, sh.inputs);
        assert_eq!(states.ncols(), sh.state_len(), "state length");

        let mut cache = Cache {
            xs: Vec::with_capacity(sh.seq_len),
            hs: vec![Array2::zeros((b, nc))],
            cs: vec![Array2::zeros((b, nc))],
            gi: Vec::with_capacity(sh.seq_len),
            gf: Vec::with_capacity(sh.seq_len),
            gg: Vec::with_capacity(sh.seq_len),
            go: Vec::with_capacity(sh.seq_len),
            u: Array2::zeros((0, 0)),
            v1: Array2::zeros((0, 0)),
            a1: Array2::zeros((0, 0)),
        };
        let p_i = p.peep.row(0);
        let p_f = p.peep.row(1);
        let p_o = p.peep.row(2);
        for t in 0..sh.seq_len {
            let x = states.slice(s![.., t * ni..(t + 1) * ni]).to_owned();
            let h_prev = &cache.hs[t];
            let c_prev = &cache.cs[t];
            let z = x.dot(&p.w_x.t()) + h_prev.dot(&p.w_h.t()) + &p.b_gates;
            let gi = (&z.slice(s![.., 0..nc]) + &(c_prev * &p_i)).mapv(sigmoid);
            let gf = (&z.slice(s![.., nc..2 * nc]) + &(c_prev * &p_f)).mapv(sigmoid);
            let gg = z.slice(s![.., 2 * nc..3 * nc]).mapv(f64::tanh);
            let c = &gf * c_prev + &gi * &gg;
            let go = (&z.slice(s![.., 3 * nc..4 * nc]) + &(&c * &p_o)).mapv(sigmoid);
            let h = &go * &c.mapv(f64::tanh);
            cache.xs.push(x);
            cache.gi.push(gi);
            cache.gf.push(gf);
            cache.gg.push(gg);
            cache.go.push(go);
            cache.hs.push(h);
            cache.cs.push(c);
        }
        let h_last = cache.hs.last().expect("at least the initial state");
        let u = (h_last.dot(&p.w_proj.t()) + &p.b_proj).mapv(f64::tanh);
        let v1 = (u.dot(&p.w_v1.t()) + &p.b_v1).mapv(|x| x.max(0.0));
        let value = v1.dot(&p.w_v2.t()) + &p.b_v2;
        let a1 = (u.dot(&p.w_a1.t()) + &p.b_a1).mapv(|x| x.max(0.0));
        let adv = a1.dot(&p.w_a2.t()) + &p.b_a2;
        let adv_mean = adv
            .mean_axis(Axis(1))
            .expect("actions")
            .insert_axis(Axis(1));
        let q = &adv - &adv_mean + &value;
        cache.u = u;
        cache.v1 = v1;
        cache.a1 = a1;
        (q, cache)
    }

    /// Gradients of `sum(dq * Q)` with respect to all parameters.
    pub fn backward(&self, cache: &Cache, dq: &Array2<f64>) -> Gradients {
        let sh = &self.shape;
        let p = &self.params;
        let nc = sh.cells;
        let mut g = Params::zeros(sh);

        let d_value = dq.sum_axis(Axis(1)).insert_axis(Axis(1));
        let d_adv = dq - &dq.mean_axis(Axis(1)).expect("actions").insert_axis(Axis(1));

        g.w_a2 = d_adv.t().dot(&cache.a1);
        g.b_a2 = d_adv.sum_axis(Axis(0)).insert_axis(Axis(0));
        let mut d_a1 = d_adv.dot(&p.w_a2);
        d_a1.zip_mut_with(&cache.a1, |d, &a| {
            if a <= 0.0 {
                *d = 0.0
            }
        });
        g.w_a1 = d_a1.t().dot(&cache.u);
        g.b_a1 = d_a1.sum_axis(Axis(0)).insert_axis(Axis(0));

        g.w_v2 = d_value.t().dot(&cache.v1);
        g.b_v2 = d_value.sum_axis(Axis(0)).insert_axis(Axis(0));
        let mut d_v1 = d_value.dot(&p.w_v2);
        d_v1.zip_mut_with(&cache.v1, |d, &a| {
            if a <= 0.0 {
                *d = 0.0
            }
        });
        g.w_v1 = d_v1.t().dot(&cache.u);
        g.b_v1 = d_v1.sum_axis(Axis(0)).insert_axis(Axis(0));

        let mut d_u = d_a1.dot(&p.w_a1) + d_v1.dot(&p.w_v1);
        d_u.zip_mut_with(&cache.u, |d, &u| *d *= 1.0 - u * u);
        let h_last = cache.hs.last().expect("hidden states");
        g.w_proj = d_u.t().dot(h_last);
        g.b_proj = d_u.sum_axis(Axis(0)).insert_axis(Axis(0));

        let mut dh = d_u.dot(&p.w_proj);
        let mut dc_next: Array2<f64> = Array2::zeros(dh.raw_dim());
        let p_i = p.peep.row(0);
        let p_f = p.peep.row(1);
        let p_o = p.peep.row(2);
        let mut dz = Array2::zeros((dh.nrows(), 4 * nc));
        for t in (0..sh.seq_len).rev() {
            let (gi, gf, gg, go) = (&cache.gi[t], &cache.gf[t], &cache.gg[t], &cache.go[t]);
            let c = &cache.cs[t + 1];
            let c_prev = &cache.cs[t];
            let tanh_c = c.mapv(f64::tanh);

            let d_zo = &dh * &tanh_c * go * &go.mapv(|o| 1.0 - o);
            let mut dc = dc_next + &dh * go * &tanh_c.mapv(|x| 1.0 - x * x) + &d_zo * &p_o;
            let d_zi = &dc * gg * gi * &gi.mapv(|x| 1.0 - x);
            let d_zf = &dc * c_prev * gf * &gf.mapv(|x| 1.0 - x);
            let d_zg = &dc * gi * &gg.mapv(|x| 1.0 - x * x);

            let mut dp = g.peep.row_mut(0);
            dp += &(&d_zi * c_prev).sum_axis(Axis(0));
            let mut dp = g.peep.row_mut(1);
            dp += &(&d_zf * c_prev).sum_axis(Axis(0));
            let mut dp = g.peep.row_mut(2);
            dp += &(&d_zo * c).sum_axis(Axis(0));

            dc *= gf;
            dc = dc + &d_zi * &p_i + &d_zf * &p_f;

            dz.slice_mut(s![.., 0..nc]).assign(&d_zi);
            dz.slice_mut(s![.., nc..2 * nc]).assign(&d_zf);
            dz.slice_mut(s![.., 2 * nc..3 * nc]).assign(&d_zg);
            dz.slice_mut(s![.., 3 * nc..4 * nc]).assign(&d_zo);

            g.w_x += &dz.t().dot(&cache.xs[t]);
            g.w_h += &dz.t().dot(&cache.hs[t]);
            g.b_gates += &dz.sum_axis(Axis(0)).insert_axis(Axis(0));
            dh = dz.dot(&p.w_h);
            dc_next = dc;
        }
        g
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
