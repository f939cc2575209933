//! Small fully connected network used by the DQN schedulers: ReLU hidden
//! layers, a linear output layer, optional inverted dropout, RMSProp and
//! global gradient-norm clipping.
//!
//! Batches are matrices with one sample per column.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::{Matrix, RngStream, Vector};
use crate::{Error, Result};

pub const INIT_RANGE: f64 = 0.3;

/// Forward-pass mode. Dropout masks are only drawn in training mode.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut RngStream),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    /// `weights[i]` maps layer `i` to layer `i+1` (`l_{i+1} × l_i`).
    weights: Vec<Matrix>,
    biases: Vec<Vector>,
    /// One entry per hidden layer.
    dropout: Vec<f64>,
}

/// Activations retained for backpropagation.
#[derive(Debug, Clone)]
pub struct Cache {
    /// Input to each layer; `inputs[0]` is the batch itself.
    inputs: Vec<Matrix>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Matrix>,
    /// Scaled dropout masks of the hidden layers (`None` = no dropout).
    masks: Vec<Option<Matrix>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vector>,
}

impl Mlp {
    /// Weights and biases uniform in `[-range, range]`. `dropout` holds one
    /// probability per hidden layer, or is empty for none.
    pub fn init(sizes: &[usize], range: f64, dropout: &[f64], rng: &mut RngStream) -> Result<Self> {
        Self::check_shape(sizes, dropout)?;
        let mut draw = |r: usize, c: usize| Matrix::from_fn(r, c, |_, _| rng.random_range(-range..=range));
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for w in sizes.windows(2) {
            weights.push(draw(w[1], w[0]));
            biases.push(draw(w[1], 1).column(0).into_owned());
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
            dropout: Self::dropout_vec(sizes, dropout),
        })
    }

    /// All parameters zero.
    pub fn zeros(sizes: &[usize], dropout: &[f64]) -> Result<Self> {
        Self::check_shape(sizes, dropout)?;
        Ok(Self {
            sizes: sizes.to_vec(),
            weights: sizes.windows(2).map(|w| Matrix::zeros(w[1], w[0])).collect(),
            biases: sizes.windows(2).map(|w| Vector::zeros(w[1])).collect(),
            dropout: Self::dropout_vec(sizes, dropout),
        })
    }

    /// Builds a network from explicit parameters.
    pub fn from_parts(weights: Vec<Matrix>, biases: Vec<Vector>, dropout: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::DimensionMismatch(
                "need one bias vector per weight matrix".into(),
            ));
        }
        let mut sizes = vec![weights[0].ncols()];
        for (w, b) in weights.iter().zip(&biases) {
            if w.ncols() != *sizes.last().unwrap() || b.len() != w.nrows() {
                return Err(Error::DimensionMismatch("inconsistent layer shapes".into()));
            }
            sizes.push(w.nrows());
        }
        Self::check_shape(&sizes, &dropout)?;
        if weights.iter().flat_map(|w| w.iter()).chain(biases.iter().flat_map(|b| b.iter())).any(|v| !v.is_finite()) {
            return Err(Error::Domain("network parameters must be finite".into()));
        }
        let dropout = Self::dropout_vec(&sizes, &dropout);
        Ok(Self {
            sizes,
            weights,
            biases,
            dropout,
        })
    }

    fn check_shape(sizes: &[usize], dropout: &[f64]) -> Result<()> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::DimensionMismatch(format!(
                "network needs at least two non-empty layers, got {sizes:?}"
            )));
        }
        let hidden = sizes.len() - 2;
        if !dropout.is_empty() && dropout.len() != hidden {
            return Err(Error::DimensionMismatch(format!(
                "{} dropout rates for {hidden} hidden layers",
                dropout.len()
            )));
        }
        if dropout.iter().any(|&p| !(0.0..1.0).contains(&p)) {
            return Err(Error::Domain("dropout rates must lie in [0, 1)".into()));
        }
        Ok(())
    }

    fn dropout_vec(sizes: &[usize], dropout: &[f64]) -> Vec<f64> {
        if dropout.is_empty() {
            vec![0.0; sizes.len() - 2]
        } else {
            dropout.to_vec()
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vector] {
        &self.biases
    }

    pub fn dropout(&self) -> &[f64] {
        &self.dropout
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn forward_batch(&self, input: &Matrix, mut mode: Mode<'_>) -> Result<(Matrix, Cache)> {
        if input.nrows() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "network input has {} rows, expected {}",
                input.nrows(),
                self.input_dim()
            )));
        }
        let layers = self.weights.len();
        let mut cache = Cache {
            inputs: Vec::with_capacity(layers),
            pre: Vec::with_capacity(layers - 1),
            masks: Vec::with_capacity(layers - 1),
        };
        let mut a = input.clone();
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w * &a;
            for mut col in z.column_iter_mut() {
                col += b;
            }
            cache.inputs.push(a);
            if i + 1 == layers {
                return Ok((z, cache));
            }
            let mut act = z.map(|v| v.max(0.0));
            let p = self.dropout[i];
            let mask = match (&mut mode, p > 0.0) {
                (Mode::Train(rng), true) => {
                    let keep = 1.0 / (1.0 - p);
                    let m = Matrix::from_fn(act.nrows(), act.ncols(), |_, _| {
                        if rng.uniform() < p {
                            0.0
                        } else {
                            keep
                        }
                    });
                    act.component_mul_assign(&m);
                    Some(m)
                }
                _ => None,
            };
            cache.pre.push(z);
            cache.masks.push(mask);
            a = act;
        }
        unreachable!("network has at least one layer")
    }

    pub fn forward(&self, input: &Vector, mode: Mode<'_>) -> Result<(Vector, Cache)> {
        let (out, cache) = self.forward_batch(&Matrix::from_column_slice(input.len(), 1, input.as_slice()), mode)?;
        Ok((out.column(0).into_owned(), cache))
    }

    /// Evaluation-mode output.
    pub fn predict(&self, input: &Vector) -> Result<Vector> {
        Ok(self.forward(input, Mode::Eval)?.0)
    }

    /// Gradients of a loss whose derivative with respect to the batch
    /// outputs is `grad_out` (same shape as the forward output).
    pub fn backward(&self, cache: &Cache, grad_out: &Matrix) -> Gradients {
        let layers = self.weights.len();
        let mut gw = vec![Matrix::zeros(0, 0); layers];
        let mut gb = vec![Vector::zeros(0); layers];
        let mut delta = grad_out.clone();
        for i in (0..layers).rev() {
            gw[i] = &delta * cache.inputs[i].transpose();
            gb[i] = Vector::from_iterator(delta.nrows(), delta.row_iter().map(|r| r.sum()));
            if i == 0 {
                break;
            }
            let mut back = self.weights[i].transpose() * &delta;
            if let Some(m) = &cache.masks[i - 1] {
                back.component_mul_assign(m);
            }
            let pre = &cache.pre[i - 1];
            back.zip_apply(pre, |d, z| {
                if z <= 0.0 {
                    *d = 0.0
                }
            });
            delta = back;
        }
        Gradients { weights: gw, biases: gb }
    }

    /// `dst := src`.
    pub fn copy_weights(src: &Mlp, dst: &mut Mlp) -> Result<()> {
        if src.sizes != dst.sizes {
            return Err(Error::DimensionMismatch(format!(
                "cannot copy a {:?} network into a {:?} network",
                src.sizes, dst.sizes
            )));
        }
        dst.weights.clone_from(&src.weights);
        dst.biases.clone_from(&src.biases);
        dst.dropout.clone_from(&src.dropout);
        Ok(())
    }

    /// Flattened parameters, layer by layer, weights (column-major) then bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b.as_slice());
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameters for a network with {}",
                params.len(),
                self.num_params()
            )));
        }
        let mut k = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let n = w.len();
            w.as_mut_slice().copy_from_slice(&params[k..k + n]);
            k += n;
            let n = b.len();
            b.as_mut_slice().copy_from_slice(&params[k..k + n]);
            k += n;
        }
        Ok(())
    }

    pub fn to_snapshot(&self) -> MlpSnapshot {
        MlpSnapshot {
            sizes: self.sizes.clone(),
            dropout: self.dropout.clone(),
            weights: self
                .weights
                .iter()
                .map(|w| w.row_iter().map(|r| r.iter().copied().collect()).collect())
                .collect(),
            biases: self.biases.iter().map(|b| b.iter().copied().collect()).collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_snapshot())?)
    }

    /// Parses and validates a weight snapshot.
    pub fn from_json(text: &str) -> Result<Self> {
        let snap: MlpSnapshot = serde_json::from_str(text)?;
        Self::from_snapshot(snap)
    }

    pub fn from_snapshot(snap: MlpSnapshot) -> Result<Self> {
        if snap.weights.len() != snap.biases.len() || snap.sizes.len() != snap.weights.len() + 1 {
            return Err(Error::DimensionMismatch("snapshot layer counts disagree".into()));
        }
        let mut weights = Vec::with_capacity(snap.weights.len());
        for (i, rows) in snap.weights.iter().enumerate() {
            let (r, c) = (snap.sizes[i + 1], snap.sizes[i]);
            if rows.len() != r || rows.iter().any(|row| row.len() != c) {
                return Err(Error::DimensionMismatch(format!(
                    "snapshot weight {i} is not {r}x{c}"
                )));
            }
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            weights.push(Matrix::from_row_slice(r, c, &flat));
        }
        let biases = snap.biases.iter().map(|b| Vector::from_vec(b.clone())).collect();
        let net = Self::from_parts(weights, biases, snap.dropout)?;
        if net.sizes != snap.sizes {
            return Err(Error::DimensionMismatch("snapshot sizes disagree with weights".into()));
        }
        Ok(net)
    }
}

/// Wire form of a network: row-major weight matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSnapshot {
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub dropout: Vec<f64>,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.weights.iter().map(|w| Matrix::zeros(w.nrows(), w.ncols())).collect(),
            biases: net.biases.iter().map(|b| Vector::zeros(b.len())).collect(),
        }
    }

    /// Global L2 norm over every parameter.
    pub fn norm(&self) -> f64 {
        let sq: f64 = self.weights.iter().map(|w| w.norm_squared()).sum::<f64>()
            + self.biases.iter().map(|b| b.norm_squared()).sum::<f64>();
        sq.sqrt()
    }

    pub fn scale(&mut self, k: f64) {
        for w in &mut self.weights {
            *w *= k;
        }
        for b in &mut self.biases {
            *b *= k;
        }
    }

    /// Flattened in the same order as [`Mlp::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b.as_slice());
        }
        out
    }
}

/// `χ = δ g / max(‖g‖₂, δ)`.
pub fn clip_gradients(mut grads: Gradients, delta: f64) -> Gradients {
    assert!(delta > 0.0, "clip threshold must be positive");
    let norm = grads.norm();
    if norm > delta {
        grads.scale(delta / norm);
    }
    grads
}

/// Mean squared TD loss `(1/B) Σ_j (target_j - q_j[a_j])²` over a batch of
/// outputs (one column per sample) and its gradient with respect to the
/// outputs; only the taken action's output receives gradient.
pub fn td_loss(outputs: &Matrix, actions: &[usize], targets: &[f64]) -> (f64, Matrix) {
    let b = actions.len();
    assert_eq!(outputs.ncols(), b);
    assert_eq!(targets.len(), b);
    let mut grad = Matrix::zeros(outputs.nrows(), b);
    let mut loss = 0.0;
    for (j, (&a, &y)) in actions.iter().zip(targets).enumerate() {
        let err = outputs[(a, j)] - y;
        loss += err * err;
        grad[(a, j)] = 2.0 * err / b as f64;
    }
    (loss / b as f64, grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rmsprop {
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
    v_w: Vec<Matrix>,
    v_b: Vec<Vector>,
}

impl Rmsprop {
    pub fn new(net: &Mlp, lr: f64, rho: f64, eps: f64) -> Self {
        let zero = Gradients::zeros_like(net);
        Self {
            lr,
            rho,
            eps,
            v_w: zero.weights,
            v_b: zero.biases,
        }
    }

    /// `v ← ρv + (1-ρ)g²`, `θ ← θ - lr·g/(√v + ε)`.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) {
        let (lr, rho, eps) = (self.lr, self.rho, self.eps);
        let update = |p: &mut f64, v: &mut f64, g: f64| {
            *v = rho * *v + (1.0 - rho) * g * g;
            *p -= lr * g / (v.sqrt() + eps);
        };
        for ((w, v), g) in net.weights.iter_mut().zip(&mut self.v_w).zip(&grads.weights) {
            for ((p, v), &g) in w.iter_mut().zip(v.iter_mut()).zip(g.iter()) {
                update(p, v, g);
            }
        }
        for ((b, v), g) in net.biases.iter_mut().zip(&mut self.v_b).zip(&grads.biases) {
            for ((p, v), &g) in b.iter_mut().zip(v.iter_mut()).zip(g.iter()) {
                update(p, v, g);
            }
        }
    }

    pub fn accumulators(&self) -> impl Iterator<Item = f64> + '_ {
        self.v_w.iter().flat_map(|m| m.iter().copied()).chain(self.v_b.iter().flat_map(|v| v.iter().copied()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::StreamId;
    use approx::assert_relative_eq;

    fn rng(k: u64) -> RngStream {
        RngStream::new(k, StreamId::WeightInit)
    }

    #[test]
    fn init_shapes_and_range() {
        let net = Mlp::init(&[3, 4, 21], INIT_RANGE, &[], &mut rng(1)).unwrap();
        assert_eq!(net.weights()[0].shape(), (4, 3));
        assert_eq!(net.weights()[1].shape(), (21, 4));
        assert!(net.parameters().iter().all(|v| v.abs() <= INIT_RANGE));
        let bench = Mlp::init(&[422, 50, 20, 20, 20], INIT_RANGE, &[0.1, 0.1, 0.0], &mut rng(2)).unwrap();
        assert_eq!(bench.num_params(), 422 * 50 + 50 + 50 * 20 + 20 + 2 * (20 * 20 + 20));
        assert!(Mlp::init(&[3], INIT_RANGE, &[], &mut rng(1)).is_err());
        assert!(Mlp::init(&[3, 4, 5], INIT_RANGE, &[0.1, 0.1], &mut rng(1)).is_err());
    }

    #[test]
    fn init_is_seeded() {
        let a = Mlp::init(&[3, 4, 21], INIT_RANGE, &[], &mut rng(5)).unwrap();
        let b = Mlp::init(&[3, 4, 21], INIT_RANGE, &[], &mut rng(5)).unwrap();
        let c = Mlp::init(&[3, 4, 21], INIT_RANGE, &[], &mut rng(6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn forward_examples() {
        let zero = Mlp::zeros(&[3, 4, 2], &[]).unwrap();
        assert_eq!(zero.predict(&Vector::from_vec(vec![1.0, 2.0, 3.0])).unwrap(), Vector::zeros(2));

        let affine = Mlp::from_parts(vec![Matrix::from_element(1, 1, 2.0)], vec![Vector::from_element(1, 1.0)], vec![]).unwrap();
        assert_eq!(affine.predict(&Vector::from_element(1, 3.0)).unwrap()[0], 7.0);

        let relu = Mlp::from_parts(
            vec![Matrix::from_element(1, 1, 1.0), Matrix::from_element(1, 1, 1.0)],
            vec![Vector::from_element(1, -1.0), Vector::zeros(1)],
            vec![],
        )
        .unwrap();
        assert_eq!(relu.predict(&Vector::zeros(1)).unwrap()[0], 0.0);
        assert!(relu.predict(&Vector::zeros(2)).is_err());
    }

    #[test]
    fn backward_examples() {
        let net = Mlp::init(&[3, 4, 21], INIT_RANGE, &[], &mut rng(3)).unwrap();
        let x = Vector::from_vec(vec![0.3, -1.0, 2.0]);
        let (out, cache) = net.forward(&x, Mode::Eval).unwrap();
        let g = net.backward(&cache, &Matrix::zeros(out.len(), 1));
        assert_eq!(g.norm(), 0.0);

        let single = Matrix::from_column_slice(3, 1, x.as_slice());
        let batch = Matrix::from_fn(3, 5, |i, _| x[i]);
        let (o1, c1) = net.forward_batch(&single, Mode::Eval).unwrap();
        let (o5, c5) = net.forward_batch(&batch, Mode::Eval).unwrap();
        let (_, g1) = td_loss(&o1, &[2], &[1.0]);
        let (_, g5) = td_loss(&o5, &[2; 5], &[1.0; 5]);
        let a = net.backward(&c1, &g1).flatten();
        let b = net.backward(&c5, &g5).flatten();
        for (u, v) in a.iter().zip(&b) {
            assert_relative_eq!(u, v, epsilon = 1e-12, max_relative = 1e-10);
        }
    }

    #[test]
    fn clip_examples() {
        let net = Mlp::zeros(&[1, 1], &[]).unwrap();
        let mut g = Gradients::zeros_like(&net);
        g.weights[0][(0, 0)] = 6.0;
        g.biases[0][0] = 8.0;
        let c = clip_gradients(g.clone(), 5.0);
        assert_relative_eq!(c.weights[0][(0, 0)], 3.0, max_relative = 1e-12);
        assert_relative_eq!(c.biases[0][0], 4.0, max_relative = 1e-12);

        g.weights[0][(0, 0)] = 1.8;
        g.biases[0][0] = 2.4;
        assert_eq!(clip_gradients(g.clone(), 5.0), g);
        let z = Gradients::zeros_like(&net);
        assert_eq!(clip_gradients(z.clone(), 5.0), z);
    }

    #[test]
    fn rmsprop_examples() {
        let mut net = Mlp::zeros(&[1, 1], &[]).unwrap();
        let mut opt = Rmsprop::new(&net, 1.0, 0.9, 1e-8);
        let zero = Gradients::zeros_like(&net);
        opt.step(&mut net, &zero);
        assert_eq!(net.parameters(), vec![0.0, 0.0]);

        let mut g = zero.clone();
        g.weights[0][(0, 0)] = 1.0;
        opt.step(&mut net, &g);
        let first = -net.parameters()[0];
        assert_relative_eq!(first, 1.0 / (0.1f64.sqrt() + 1e-8), max_relative = 1e-12);
        assert_relative_eq!(first, 3.1623, max_relative = 1e-4);
        let before = net.parameters()[0];
        opt.step(&mut net, &g);
        let second = before - net.parameters()[0];
        assert!(second < first);
        assert!(opt.accumulators().all(|v| v >= 0.0));
    }

    #[test]
    fn copy_examples() {
        let src = Mlp::init(&[3, 4, 21], INIT_RANGE, &[], &mut rng(10)).unwrap();
        let mut dst = Mlp::init(&[3, 4, 21], INIT_RANGE, &[], &mut rng(11)).unwrap();
        Mlp::copy_weights(&src, &mut dst).unwrap();
        let x = Vector::from_vec(vec![0.5, 1.0, -2.0]);
        assert_eq!(src.predict(&x).unwrap(), dst.predict(&x).unwrap());

        let mut src2 = src.clone();
        src2.set_parameters(&vec![0.0; src.num_params()]).unwrap();
        assert_eq!(dst.parameters(), src.parameters());

        let mut other = Mlp::zeros(&[3, 5, 21], &[]).unwrap();
        assert!(Mlp::copy_weights(&src, &mut other).is_err());
    }

    #[test]
    fn inverted_dropout_preserves_expectation() {
        let net = Mlp::init(&[4, 30, 6], INIT_RANGE, &[0.3], &mut rng(4)).unwrap();
        let x = Vector::from_vec(vec![0.7, -0.2, 1.5, 0.4]);
        let eval = net.predict(&x).unwrap();
        let mut drop = RngStream::new(9, StreamId::Dropout);
        let n = 10_000;
        let batch = Matrix::from_fn(4, n, |i, _| x[i]);
        let (out, _) = net.forward_batch(&batch, Mode::Train(&mut drop)).unwrap();
        for k in 0..6 {
            let row: Vec<f64> = out.row(k).iter().copied().collect();
            let mean = row.iter().sum::<f64>() / n as f64;
            let se = (crate::numerics::sample_variance(&row) / n as f64).sqrt();
            assert!((mean - eval[k]).abs() <= 3.0 * se + 1e-12, "output {k}: {mean} vs {}", eval[k]);
        }
    }

    #[test]
    fn snapshot_round_trip_and_validation() {
        let net = Mlp::init(&[3, 4, 2], INIT_RANGE, &[0.1], &mut rng(12)).unwrap();
        let back = Mlp::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(back, net);
        assert!(Mlp::from_json(r#"{"sizes":[2,1],"weights":[[[1.0]]],"biases":[[0.0]]}"#).is_err());
        assert!(Mlp::from_json(r#"{"sizes":[1,1],"weights":[[[1.0]]],"biases":[[0.0, 1.0]]}"#).is_err());
        assert!(Mlp::from_json("[").is_err());
        assert!(Mlp::from_json(r#"{"sizes":[1,1],"weights":[[[1.0]]],"biases":[[0.0]]}"#).is_ok());
    }
}
