use rand::{Rng, RngCore};

use super::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Activation> {
        match name {
            "identity" => Some(Activation::Identity),
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }

    fn apply(self, z: &Matrix) -> Matrix {
        match self {
            Activation::Identity => z.clone(),
            Activation::Relu => z.map(|x| if x > 0.0 { x } else { 0.0 }),
            Activation::Tanh => z.map(f64::tanh),
        }
    }

    /// In place: dz ∘= act'(z), with the derivative read from the
    /// pre-activation `z` (ReLU, subgradient 0 at z == 0) or the
    /// activation `a` (tanh: 1 - a²).
    fn mask_derivative(self, dz: &mut Matrix, z: &Matrix, a: &Matrix) {
        match self {
            Activation::Identity => {}
            Activation::Relu => {
                for (d, zv) in dz.as_mut_slice().iter_mut().zip(z.as_slice()) {
                    if !(*zv > 0.0) {
                        *d = 0.0;
                    }
                }
            }
            Activation::Tanh => {
                for (d, av) in dz.as_mut_slice().iter_mut().zip(a.as_slice()) {
                    *d *= 1.0 - av * av;
                }
            }
        }
    }
}

/// Fully-connected network. `weights[k]` has shape
/// (layer_sizes[k+1], layer_sizes[k]); inputs are batches of row vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    pub(crate) weights: Vec<Matrix>,
    pub(crate) biases: Vec<Vec<f64>>,
    hidden_activation: Activation,
    output_activation: Activation,
}

/// Per-layer pre-activations and activations from one forward pass.
pub struct ForwardCache {
    input: Matrix,
    pre_activations: Vec<Matrix>,
    activations: Vec<Matrix>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.input.rows()
    }

    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("cache holds at least one layer")
    }
}

/// Gradient (or any other per-parameter accumulator) shaped like an [`Mlp`].
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        MlpGrads {
            weights: mlp.weights.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect(),
            biases: mlp.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// self += scale · other, elementwise.
    pub fn add_scaled(&mut self, other: &MlpGrads, scale: f64) {
        assert_eq!(self.weights.len(), other.weights.len());
        for (w, ow) in self.weights.iter_mut().zip(&other.weights) {
            assert_eq!((w.rows(), w.cols()), (ow.rows(), ow.cols()));
            for (x, y) in w.as_mut_slice().iter_mut().zip(ow.as_slice()) {
                *x += scale * y;
            }
        }
        for (b, ob) in self.biases.iter_mut().zip(&other.biases) {
            assert_eq!(b.len(), ob.len());
            for (x, y) in b.iter_mut().zip(ob) {
                *x += scale * y;
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.as_slice().len()).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Flat parameter order: layer 0 weights row-major, layer 0 biases, layer 1 ...
    pub fn param(&self, mut idx: usize) -> f64 {
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let wn = w.as_slice().len();
            if idx < wn {
                return w.as_slice()[idx];
            }
            idx -= wn;
            if idx < b.len() {
                return b[idx];
            }
            idx -= b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn first_non_finite(&self) -> Option<(usize, &'static str, usize, f64)> {
        for (layer, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            if let Some((i, &v)) = w.as_slice().iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Some((layer, "weight", i, v));
            }
            if let Some((i, &v)) = b.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Some((layer, "bias", i, v));
            }
        }
        None
    }
}

impl Mlp {
    /// Uniform ±1/√fan_in init for weights and biases; draw order is
    /// layer-by-layer, weights row-major then biases, so equal seeds give
    /// equal parameters.
    pub fn new(
        layer_sizes: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        rng: &mut dyn RngCore,
    ) -> Mlp {
        assert!(layer_sizes.len() >= 2, "need at least input and output layer sizes");
        assert!(layer_sizes.iter().all(|&s| s > 0), "zero-width layer");
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for k in 0..layer_sizes.len() - 1 {
            let fan_in = layer_sizes[k];
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.push(Matrix::from_fn(layer_sizes[k + 1], fan_in, |_, _| {
                rng.random_range(-bound..bound)
            }));
            biases.push((0..layer_sizes[k + 1]).map(|_| rng.random_range(-bound..bound)).collect());
        }
        Mlp {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            hidden_activation,
            output_activation,
        }
    }

    pub(crate) fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Mlp {
        assert!(layer_sizes.len() >= 2);
        assert_eq!(weights.len(), layer_sizes.len() - 1);
        assert_eq!(biases.len(), layer_sizes.len() - 1);
        for k in 0..weights.len() {
            assert_eq!((weights[k].rows(), weights[k].cols()), (layer_sizes[k + 1], layer_sizes[k]));
            assert_eq!(biases[k].len(), layer_sizes[k + 1]);
        }
        Mlp {
            layer_sizes,
            weights,
            biases,
            hidden_activation,
            output_activation,
        }
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, layer: usize) -> &Matrix {
        &self.weights[layer]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    fn activation_for(&self, layer: usize) -> Activation {
        if layer + 1 == self.weights.len() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    pub fn forward(&self, input: &Matrix) -> (Matrix, ForwardCache) {
        assert_eq!(input.cols(), self.input_dim(), "input width vs layer_sizes[0]");
        let mut pre_activations = Vec::with_capacity(self.weights.len());
        let mut activations = Vec::with_capacity(self.weights.len());
        let mut a = input.clone();
        for k in 0..self.weights.len() {
            let mut z = a.matmul_nt(&self.weights[k]);
            z.add_row_broadcast(&self.biases[k]);
            let next = self.activation_for(k).apply(&z);
            pre_activations.push(z);
            activations.push(next.clone());
            a = next;
        }
        (
            a,
            ForwardCache {
                input: input.clone(),
                pre_activations,
                activations,
            },
        )
    }

    /// Forward pass without retaining intermediates; for target networks,
    /// frozen snapshots and evaluation.
    pub fn forward_output(&self, input: &Matrix) -> Matrix {
        assert_eq!(input.cols(), self.input_dim(), "input width vs layer_sizes[0]");
        let mut a = input.clone();
        for k in 0..self.weights.len() {
            let mut z = a.matmul_nt(&self.weights[k]);
            z.add_row_broadcast(&self.biases[k]);
            a = self.activation_for(k).apply(&z);
        }
        a
    }

    fn check_cache(&self, cache: &ForwardCache, output_grad: &Matrix) {
        assert_eq!(cache.pre_activations.len(), self.weights.len(), "cache layer count");
        assert_eq!(cache.input.cols(), self.input_dim(), "cache input width");
        assert_eq!(
            (output_grad.rows(), output_grad.cols()),
            (cache.input.rows(), self.output_dim()),
            "output gradient shape"
        );
        for (k, z) in cache.pre_activations.iter().enumerate() {
            assert_eq!(z.cols(), self.layer_sizes[k + 1], "cache width at layer {k}");
        }
    }

    /// Backpropagation through the cached forward pass. `output_grad` is
    /// ∂loss/∂output including any batch averaging the loss applies; the
    /// returned gradients use exactly that weighting.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &Matrix) -> MlpGrads {
        self.backward_impl(cache, output_grad, true, false).0.unwrap()
    }

    /// Like [`Mlp::backward`] but also returns ∂loss/∂input.
    pub fn backward_with_input(&self, cache: &ForwardCache, output_grad: &Matrix) -> (MlpGrads, Matrix) {
        let (g, i) = self.backward_impl(cache, output_grad, true, true);
        (g.unwrap(), i.unwrap())
    }

    /// ∂loss/∂input only, skipping parameter gradients (frozen network).
    pub fn backward_input_only(&self, cache: &ForwardCache, output_grad: &Matrix) -> Matrix {
        self.backward_impl(cache, output_grad, false, true).1.unwrap()
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache,
        output_grad: &Matrix,
        want_params: bool,
        want_input: bool,
    ) -> (Option<MlpGrads>, Option<Matrix>) {
        self.check_cache(cache, output_grad);
        let layers = self.weights.len();
        let mut grads = want_params.then(|| MlpGrads {
            weights: Vec::new(),
            biases: Vec::new(),
        });
        let mut weight_rev = Vec::new();
        let mut bias_rev = Vec::new();
        let mut dz = output_grad.clone();
        let mut input_grad = None;
        for k in (0..layers).rev() {
            self.activation_for(k)
                .mask_derivative(&mut dz, &cache.pre_activations[k], &cache.activations[k]);
            let a_prev = if k == 0 { &cache.input } else { &cache.activations[k - 1] };
            if want_params {
                weight_rev.push(dz.matmul_tn(a_prev));
                bias_rev.push(dz.col_sums());
            }
            if k > 0 {
                dz = dz.matmul(&self.weights[k]);
            } else if want_input {
                input_grad = Some(dz.matmul(&self.weights[k]));
            }
        }
        if let Some(g) = grads.as_mut() {
            weight_rev.reverse();
            bias_rev.reverse();
            g.weights = weight_rev;
            g.biases = bias_rev;
        }
        (grads, input_grad)
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.as_slice().len()).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Flat parameter order: layer 0 weights row-major, layer 0 biases, layer 1 ...
    pub fn param(&self, mut idx: usize) -> f64 {
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let wn = w.as_slice().len();
            if idx < wn {
                return w.as_slice()[idx];
            }
            idx -= wn;
            if idx < b.len() {
                return b[idx];
            }
            idx -= b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut idx: usize, value: f64) {
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            let wn = w.as_slice().len();
            if idx < wn {
                w.as_mut_slice()[idx] = value;
                return;
            }
            idx -= wn;
            if idx < b.len() {
                b[idx] = value;
                return;
            }
            idx -= b.len();
        }
        panic!("parameter index out of range");
    }

    /// Deep copy; mutating either side afterwards leaves the other untouched.
    pub fn snapshot(&self) -> Mlp {
        self.clone()
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.layer_sizes == other.layer_sizes
    }
}

/// target ← rho·target + (1−rho)·main, elementwise, with the result pinned
/// inside [min(target, main), max(target, main)] so the convex-combination
/// property survives floating-point rounding.
pub fn polyak_update(target: &mut Mlp, main: &Mlp, rho: f64) {
    assert!(target.same_shape(main), "polyak_update: shape mismatch");
    assert!((0.0..=1.0).contains(&rho), "polyak_update: rho = {rho}");
    let blend = |t: &mut f64, m: f64| {
        let lo = t.min(m);
        let hi = t.max(m);
        *t = (rho * *t + (1.0 - rho) * m).clamp(lo, hi);
    };
    for (tw, mw) in target.weights.iter_mut().zip(&main.weights) {
        for (t, &m) in tw.as_mut_slice().iter_mut().zip(mw.as_slice()) {
            blend(t, m);
        }
    }
    for (tb, mb) in target.biases.iter_mut().zip(&main.biases) {
        for (t, &m) in tb.iter_mut().zip(mb) {
            blend(t, m);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let net = Mlp::new(&[2, 1], Activation::Relu, Activation::Identity, &mut rng(0));
        let bound = 1.0 / 2.0_f64.sqrt();
        for i in 0..net.param_count() {
            assert!(net.param(i).abs() <= bound);
        }
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = Mlp::new(&[3, 8, 2], Activation::Relu, Activation::Tanh, &mut rng(7));
        let b = Mlp::new(&[3, 8, 2], Activation::Relu, Activation::Tanh, &mut rng(7));
        let c = Mlp::new(&[3, 8, 2], Activation::Relu, Activation::Tanh, &mut rng(8));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn init_shapes_match_layer_sizes() {
        let net = Mlp::new(&[3, 256, 256, 1], Activation::Relu, Activation::Identity, &mut rng(0));
        assert_eq!((net.weight(0).rows(), net.weight(0).cols()), (256, 3));
        assert_eq!((net.weight(1).rows(), net.weight(1).cols()), (256, 256));
        assert_eq!((net.weight(2).rows(), net.weight(2).cols()), (1, 256));
        assert_eq!(net.bias(2).len(), 1);
    }

    #[test]
    fn zero_net_maps_everything_to_zero() {
        let mut net = Mlp::new(&[4, 5, 2], Activation::Relu, Activation::Identity, &mut rng(1));
        for i in 0..net.param_count() {
            net.set_param(i, 0.0);
        }
        let input = Matrix::from_vec(3, 4, vec![1.0; 12]);
        let (out, _) = net.forward(&input);
        assert!(out.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_affine_layer_computes_wx_plus_b() {
        let mut net = Mlp::new(&[1, 1], Activation::Relu, Activation::Identity, &mut rng(2));
        net.set_param(0, 2.0); // w
        net.set_param(1, 1.0); // b
        let (out, _) = net.forward(&Matrix::from_row(&[3.0]));
        assert_eq!(out.get(0, 0), 7.0);
    }

    #[test]
    fn identical_rows_produce_identical_outputs() {
        let net = Mlp::new(&[3, 16, 2], Activation::Relu, Activation::Tanh, &mut rng(3));
        let input = Matrix::from_vec(2, 3, vec![0.5, -0.25, 1.5, 0.5, -0.25, 1.5]);
        let (out, _) = net.forward(&input);
        assert_eq!(out.row(0), out.row(1));
    }

    #[test]
    fn forward_is_row_independent_under_permutation() {
        let net = Mlp::new(&[4, 12, 3], Activation::Relu, Activation::Identity, &mut rng(4));
        let input = Matrix::from_fn(6, 4, |i, j| (i * 4 + j) as f64 * 0.1 - 1.0);
        let perm = [3usize, 0, 5, 1, 4, 2];
        let permuted = Matrix::from_fn(6, 4, |i, j| input.get(perm[i], j));
        let (out, _) = net.forward(&input);
        let (out_p, _) = net.forward(&permuted);
        for (i, &p) in perm.iter().enumerate() {
            assert_eq!(out_p.row(i), out.row(p));
        }
    }

    #[test]
    fn zero_output_grad_gives_zero_param_grads() {
        let net = Mlp::new(&[3, 8, 2], Activation::Relu, Activation::Tanh, &mut rng(5));
        let input = Matrix::from_fn(4, 3, |i, j| (i + j) as f64 * 0.3 - 0.5);
        let (_, cache) = net.forward(&input);
        let grads = net.backward(&cache, &Matrix::zeros(4, 2));
        assert_eq!(grads, MlpGrads::zeros_like(&net));
    }

    #[test]
    fn relu_at_exact_zero_uses_zero_subgradient() {
        // Zero weights and biases put every pre-activation exactly at 0.
        let mut net = Mlp::new(&[2, 3, 1], Activation::Relu, Activation::Identity, &mut rng(6));
        for i in 0..net.param_count() {
            net.set_param(i, 0.0);
        }
        let (_, cache) = net.forward(&Matrix::from_row(&[1.0, -2.0]));
        let grads = net.backward(&cache, &Matrix::from_row(&[1.0]));
        // The output-layer bias still sees gradient 1; everything upstream of
        // the ReLU kink must be zeroed.
        assert_eq!(grads.biases[1], vec![1.0]);
        assert!(grads.weights[0].as_slice().iter().all(|&g| g == 0.0));
        assert_eq!(grads.biases[0], vec![0.0; 3]);
    }

    #[test]
    fn polyak_endpoints_are_exact() {
        let main = Mlp::new(&[2, 4, 1], Activation::Relu, Activation::Identity, &mut rng(8));
        let base = Mlp::new(&[2, 4, 1], Activation::Relu, Activation::Identity, &mut rng(9));

        let mut t = base.clone();
        polyak_update(&mut t, &main, 1.0);
        assert_eq!(t, base);

        let mut t = base.clone();
        polyak_update(&mut t, &main, 0.0);
        assert_eq!(t, main);
    }

    #[test]
    fn polyak_arithmetic_example() {
        let mut target = Mlp::new(&[1, 1], Activation::Relu, Activation::Identity, &mut rng(10));
        let mut main = target.clone();
        target.set_param(0, 1.0);
        main.set_param(0, 0.0);
        polyak_update(&mut target, &main, 0.995);
        assert_eq!(target.param(0), 0.995);
    }

    #[test]
    fn polyak_stays_between_endpoints() {
        let mut target = Mlp::new(&[3, 8, 2], Activation::Relu, Activation::Identity, &mut rng(11));
        let main = Mlp::new(&[3, 8, 2], Activation::Relu, Activation::Identity, &mut rng(12));
        let before = target.clone();
        polyak_update(&mut target, &main, 0.7);
        for i in 0..target.param_count() {
            let lo = before.param(i).min(main.param(i));
            let hi = before.param(i).max(main.param(i));
            let v = target.param(i);
            assert!(v >= lo && v <= hi);
        }
    }

    #[test]
    #[should_panic(expected = "shape mismatch")]
    fn polyak_rejects_shape_mismatch() {
        let mut a = Mlp::new(&[2, 3, 1], Activation::Relu, Activation::Identity, &mut rng(13));
        let b = Mlp::new(&[2, 4, 1], Activation::Relu, Activation::Identity, &mut rng(14));
        polyak_update(&mut a, &b, 0.5);
    }

    #[test]
    fn snapshot_is_independent_deep_copy() {
        let mut net = Mlp::new(&[2, 3, 1], Activation::Relu, Activation::Identity, &mut rng(15));
        let copy = net.snapshot();
        assert_eq!(net, copy);
        net.set_param(0, 123.0);
        assert_ne!(net.param(0), copy.param(0));
    }
}
