use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gabor::gabor_forward;
use super::layers::{collapse_columns, softmax_columns, subsample, subsample_backward};
use super::recurrent::{backward_dir, forward_dir, DirCache};
use super::{Direction, FeatureGrid, LayerSpec, NetworkSpec, OutputMatrix};
use crate::error::{Error, Result};
use crate::fields::Alphabet;
use crate::math::{matvec, matvec_backward};
use crate::preproc::Raster;

/// Half-width of the uniform initialization interval.
pub const INIT_RANGE: f64 = 0.1;

/// One flat parameter array per stage (empty for stages without weights).
/// Gradients and optimizer velocities use the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightStore {
    names: Vec<String>,
    layers: Vec<Vec<f64>>,
}

impl WeightStore {
    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let counts = spec.param_counts()?;
        let names = spec.stages.iter().enumerate().map(|(i, s)| format!("{i}:{}", s.kind_name())).collect();
        Ok(WeightStore { names, layers: counts.into_iter().map(|n| vec![0.0; n]).collect() })
    }

    /// Uniform in `[-INIT_RANGE, INIT_RANGE]` from a ChaCha8 stream seeded
    /// with `seed`, filled stage by stage.
    pub fn random(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        let mut store = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut store.layers {
            for w in layer.iter_mut() {
                *w = rng.gen_range(-INIT_RANGE..=INIT_RANGE);
            }
        }
        Ok(store)
    }

    /// Rebuilds a store from raw arrays, checking them against `spec`.
    pub fn from_layers(spec: &NetworkSpec, layers: Vec<Vec<f64>>) -> Result<Self> {
        let mut store = Self::zeros(spec)?;
        if layers.len() != store.layers.len() {
            return Err(Error::WeightShape(format!("{} layers, spec has {}", layers.len(), store.layers.len())));
        }
        for (i, (have, want)) in layers.iter().zip(&store.layers).enumerate() {
            if have.len() != want.len() {
                return Err(Error::WeightShape(format!("layer {i}: {} weights, spec needs {}", have.len(), want.len())));
            }
        }
        store.layers = layers;
        Ok(store)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> &[f64] {
        &self.layers[i]
    }

    pub fn layer_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.layers[i]
    }

    pub fn total(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn same_shape(&self, other: &WeightStore) -> bool {
        self.layers.len() == other.layers.len() && self.layers.iter().zip(&other.layers).all(|(a, b)| a.len() == b.len())
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flatten()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flatten()
    }

    /// Locates the `index`-th parameter in flat order as `(layer, offset)`.
    pub fn locate(&self, mut index: usize) -> Option<(usize, usize)> {
        for (l, layer) in self.layers.iter().enumerate() {
            if index < layer.len() {
                return Some((l, index));
            }
            index -= layer.len();
        }
        None
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &WeightStore, scale: f64) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn fill(&mut self, value: f64) {
        self.iter_mut().for_each(|v| *v = value);
    }

    pub fn l2_norm(&self) -> f64 {
        libm::sqrt(self.iter().map(|v| v * v).sum())
    }

    pub fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

/// Activations recorded by a forward pass, consumed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct Trace {
    acts: Vec<FeatureGrid>,
    recurrent: Vec<Option<Vec<DirCache>>>,
    logits: Vec<f64>,
    output: OutputMatrix,
}

impl Trace {
    pub fn output(&self) -> &OutputMatrix {
        &self.output
    }

    /// Pre-softmax activations, `timesteps × classes` row-major.
    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn into_output(self) -> OutputMatrix {
        self.output
    }
}

/// A network spec together with its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    alphabet: Alphabet,
    weights: WeightStore,
}

impl Network {
    /// Randomly initialized from the spec's own seed.
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        let weights = WeightStore::random(&spec, spec.seed)?;
        Self::from_parts(spec, weights)
    }

    pub fn from_parts(spec: NetworkSpec, weights: WeightStore) -> Result<Self> {
        spec.validate()?;
        let reference = WeightStore::zeros(&spec)?;
        if !reference.same_shape(&weights) {
            return Err(Error::WeightShape("arrays do not match the stage plan".into()));
        }
        let alphabet = spec.alphabet()?;
        Ok(Network { spec, alphabet, weights })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn weights(&self) -> &WeightStore {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut WeightStore {
        &mut self.weights
    }

    pub fn into_parts(self) -> (NetworkSpec, WeightStore) {
        (self.spec, self.weights)
    }

    pub fn forward(&self, r: &Raster) -> Result<OutputMatrix> {
        Ok(self.trace(r)?.output)
    }

    /// Forward pass that keeps every intermediate activation.
    pub fn trace(&self, r: &Raster) -> Result<Trace> {
        if r.height() != self.spec.input_height {
            return Err(Error::InputHeight { expected: self.spec.input_height, actual: r.height() });
        }
        let k = self.alphabet.len();
        let mut acts = Vec::with_capacity(self.spec.stages.len() + 1);
        let mut recurrent = Vec::with_capacity(self.spec.stages.len());
        acts.push(gabor_forward(r, &self.spec.gabor));
        let mut logits = Vec::new();

        for (i, stage) in self.spec.stages.iter().enumerate() {
            let input = &acts[i];
            let w = self.weights.layer(i);
            let name = format!("stage {i} ({})", stage.kind_name());
            let mut caches = None;
            let out = match *stage {
                LayerSpec::Subsample { fy, fx, .. } => subsample(input, fy, fx, w)?,
                LayerSpec::Tanh { .. } => subsample(input, 1, 1, w)?,
                LayerSpec::Leaky { .. } | LayerSpec::Mdlstm { .. } => {
                    let (kind, units) = stage.recurrent_kind().expect("recurrent stage");
                    let per_dir = w.len() / 4;
                    let mut merged = FeatureGrid::zeros(input.width(), input.height(), units);
                    let mut dirs = Vec::with_capacity(4);
                    for (d, dir) in Direction::ALL.iter().enumerate() {
                        let cache = forward_dir(kind, units, &w[d * per_dir..(d + 1) * per_dir], input, *dir, &name)?;
                        for (m, s) in merged.values_mut().iter_mut().zip(&cache.state) {
                            *m += s;
                        }
                        dirs.push(cache);
                    }
                    caches = Some(dirs);
                    merged
                }
                LayerSpec::Collapse => collapse_columns(input),
                LayerSpec::Softmax => {
                    let c = input.channels();
                    let mut out = FeatureGrid::zeros(input.width(), 1, k);
                    let mut v = vec![0.0; c + 1];
                    for t in 0..input.width() {
                        v[..c].copy_from_slice(input.at(t, 0));
                        v[c] = 1.0;
                        matvec(w, &v, out.at_mut(t, 0));
                    }
                    logits = out.values().to_vec();
                    out
                }
            };
            out.check_finite(&name)?;
            acts.push(out);
            recurrent.push(caches);
        }
        let output = softmax_columns(&logits, k, self.alphabet.garbage_index())?;
        Ok(Trace { acts, recurrent, logits, output })
    }

    /// Exact reverse-mode gradients of every trainable parameter given the
    /// gradient of the loss with respect to the pre-softmax logits
    /// (`timesteps × classes`, row-major). The Gabor bank has no entry.
    pub fn backward(&self, trace: &Trace, dlogits: &[f64]) -> Result<WeightStore> {
        let k = self.alphabet.len();
        if dlogits.len() != trace.output.timesteps() * k {
            return Err(Error::InvalidParameter(format!(
                "logit gradient has {} entries, expected {}",
                dlogits.len(),
                trace.output.timesteps() * k
            )));
        }
        let mut grads = WeightStore::zeros(&self.spec)?;
        let n = self.spec.stages.len();
        let mut dout = FeatureGrid::from_values(trace.output.timesteps(), 1, k, dlogits.to_vec())?;

        for i in (0..n).rev() {
            let input = &trace.acts[i];
            let out = &trace.acts[i + 1];
            let w = self.weights.layer(i);
            let need_input = i > 0;
            let mut din = FeatureGrid::zeros(input.width(), input.height(), input.channels());
            let dw = grads.layer_mut(i);
            match self.spec.stages[i] {
                LayerSpec::Softmax => {
                    let c = input.channels();
                    let mut v = vec![0.0; c + 1];
                    let mut dv = vec![0.0; c + 1];
                    for t in 0..input.width() {
                        v[..c].copy_from_slice(input.at(t, 0));
                        v[c] = 1.0;
                        dv.fill(0.0);
                        matvec_backward(w, &v, dout.at(t, 0), dw, &mut dv);
                        din.at_mut(t, 0).copy_from_slice(&dv[..c]);
                    }
                }
                LayerSpec::Collapse => {
                    for y in 0..input.height() {
                        for x in 0..input.width() {
                            din.at_mut(x, y).copy_from_slice(dout.at(x, 0));
                        }
                    }
                }
                LayerSpec::Subsample { fy, fx, .. } => {
                    subsample_backward(input, fy, fx, w, out, &dout, dw, need_input.then_some(&mut din));
                }
                LayerSpec::Tanh { .. } => {
                    subsample_backward(input, 1, 1, w, out, &dout, dw, need_input.then_some(&mut din));
                }
                LayerSpec::Leaky { .. } | LayerSpec::Mdlstm { .. } => {
                    let (kind, units) = self.spec.stages[i].recurrent_kind().expect("recurrent stage");
                    let caches = trace.recurrent[i].as_ref().ok_or_else(|| Error::InvalidParameter("trace lacks recurrent cache".into()))?;
                    let per_dir = w.len() / 4;
                    for (d, dir) in Direction::ALL.iter().enumerate() {
                        backward_dir(
                            kind,
                            units,
                            &w[d * per_dir..(d + 1) * per_dir],
                            input,
                            *dir,
                            &caches[d],
                            dout.values(),
                            &mut dw[d * per_dir..(d + 1) * per_dir],
                            need_input.then_some(&mut din),
                        );
                    }
                }
            }
            dout = din;
        }
        if !grads.all_finite() {
            return Err(Error::NonFinite { stage: "backward pass".into(), x: 0, y: 0 });
        }
        Ok(grads)
    }
}

/// Free-function form of [`Network::forward`].
pub fn network_forward(spec: &NetworkSpec, weights: &WeightStore, r: &Raster) -> Result<OutputMatrix> {
    Network::from_parts(spec.clone(), weights.clone())?.forward(r)
}

/// Free-function form of [`Network::backward`]: runs the forward pass again
/// and back-propagates `dlogits`.
pub fn network_backward(spec: &NetworkSpec, weights: &WeightStore, r: &Raster, dlogits: &[f64]) -> Result<WeightStore> {
    let net = Network::from_parts(spec.clone(), weights.clone())?;
    let trace = net.trace(r)?;
    net.backward(&trace, dlogits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::AlphabetSpec;
    use alloc::string::ToString;

    fn toy_spec() -> NetworkSpec {
        NetworkSpec::desk("t", AlphabetSpec::Symbols(vec!["a".to_string(), "b".to_string(), "c".to_string()]), 3, [4, 5, 4, 3], 42)
    }

    fn test_raster(w: usize) -> Raster {
        let data = (0..16 * w).map(|i| ((i * 97 + 13) % 256) as u8).collect();
        Raster::new(w, 16, data).unwrap()
    }

    #[test]
    fn output_shape_and_normalization() {
        let net = Network::new(toy_spec()).unwrap();
        let m = net.forward(&test_raster(27)).unwrap();
        assert_eq!(m.timesteps(), 9);
        assert_eq!(m.classes(), 4);
        assert_eq!(m.blank(), 3);
        for t in 0..m.timesteps() {
            assert!((m.column(t).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn width_27_with_x_factor_9_gives_three_frames() {
        let spec = NetworkSpec::standard("n", crate::FieldType::Marital, [2, 2, 2, 2, 2, 2], 1);
        let net = Network::new(spec).unwrap();
        let r = Raster::filled(27, 128, 200);
        assert_eq!(net.forward(&r).unwrap().timesteps(), 3);
    }

    #[test]
    fn wrong_height_rejected() {
        let net = Network::new(toy_spec()).unwrap();
        let r = Raster::filled(10, 17, 255);
        assert_eq!(net.forward(&r), Err(Error::InputHeight { expected: 16, actual: 17 }));
    }

    #[test]
    fn forward_is_deterministic() {
        let a = Network::new(toy_spec()).unwrap().forward(&test_raster(20)).unwrap();
        let b = Network::new(toy_spec()).unwrap().forward(&test_raster(20)).unwrap();
        assert_eq!(a.probs(), b.probs());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = Network::new(toy_spec()).unwrap();
        let trace = net.trace(&test_raster(12)).unwrap();
        let g = net.backward(&trace, &vec![0.0; trace.logits().len()]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        assert_eq!(g.total(), net.weights().total());
    }

    #[test]
    fn gradient_store_has_no_gabor_entry() {
        let spec = toy_spec();
        let g = WeightStore::zeros(&spec).unwrap();
        assert_eq!(g.layers().len(), spec.stages.len());
        assert!(g.names().iter().all(|n| !n.contains("gabor")));
        assert_eq!(g.total(), spec.total_trainable().unwrap());
    }

    #[test]
    fn init_is_bounded_and_seeded() {
        let spec = toy_spec();
        let a = WeightStore::random(&spec, 5).unwrap();
        let b = WeightStore::random(&spec, 5).unwrap();
        let c = WeightStore::random(&spec, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|v| v.abs() <= INIT_RANGE));
    }

    #[test]
    fn mismatched_weights_rejected() {
        let spec = toy_spec();
        let mut layers = WeightStore::zeros(&spec).unwrap().layers().to_vec();
        layers[0].pop();
        assert!(WeightStore::from_layers(&spec, layers).is_err());
    }
}
