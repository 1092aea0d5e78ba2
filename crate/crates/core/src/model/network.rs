//! The MSTCN network: encoder → bottleneck → stacked dilated blocks →
//! multi-scale skip concatenation → pooled three-layer classifier.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::category::{decode, Category};
use super::config::{FeaturesMode, ModelConfig, NormMode, OutputActivation};
use crate::tensorcore::{Conv1dSpec, Float, Tape, Tensor, Var};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
struct NormIdx {
    gain: usize,
    bias: usize,
}

#[derive(Clone, Copy, Debug)]
struct BlockIdx {
    in_w: usize,
    in_b: usize,
    alpha1: usize,
    norm1: Option<NormIdx>,
    dconv_w: usize,
    dconv_b: usize,
    alpha2: usize,
    norm2: Option<NormIdx>,
    res_w: usize,
    res_b: usize,
    skip_w: usize,
    skip_b: usize,
}

#[derive(Clone, Debug)]
struct Layout {
    encoder: usize,
    bottleneck_norm: Option<NormIdx>,
    bottleneck_w: usize,
    bottleneck_b: usize,
    blocks: Vec<BlockIdx>,
    linear: [(usize, usize); 3],
}

/// How a parameter is initialised.
#[derive(Clone, Copy, Debug)]
enum Init {
    Uniform { fan_in: usize },
    Const(f64),
}

struct Builder {
    specs: Vec<(String, Vec<usize>, Init)>,
}

impl Builder {
    fn add(&mut self, name: String, shape: Vec<usize>, init: Init) -> usize {
        self.specs.push((name, shape, init));
        self.specs.len() - 1
    }

    fn norm(&mut self, prefix: &str, channels: usize, mode: NormMode) -> Option<NormIdx> {
        (mode != NormMode::None).then(|| NormIdx {
            gain: self.add(
                format!("{prefix}.gain"),
                vec![channels, 1],
                Init::Const(1.0),
            ),
            bias: self.add(
                format!("{prefix}.bias"),
                vec![channels, 1],
                Init::Const(0.0),
            ),
        })
    }
}

fn layout(config: &ModelConfig) -> (Layout, Vec<(String, Vec<usize>, Init)>) {
    let (n, e, h, p, k) = (
        config.filters,
        config.bottleneck_channels,
        config.hidden_channels,
        config.skip_channels,
        config.kernel_size,
    );
    let mode = config.norm_mode;
    let mut b = Builder { specs: Vec::new() };
    let encoder = b.add(
        "encoder.basis".into(),
        vec![n, config.filter_len],
        Init::Uniform {
            fan_in: config.filter_len,
        },
    );
    let bottleneck_norm = b.norm("bottleneck.norm", n, mode);
    let bottleneck_w = b.add(
        "bottleneck.conv.weight".into(),
        vec![e, n, 1],
        Init::Uniform { fan_in: n },
    );
    let bottleneck_b = b.add("bottleneck.conv.bias".into(), vec![e], Init::Const(0.0));
    let mut blocks = Vec::with_capacity(config.block_count());
    for i in 0..config.block_count() {
        let pre = format!(
            "blocks.{}.{}",
            i / config.blocks_per_repeat,
            i % config.blocks_per_repeat
        );
        blocks.push(BlockIdx {
            in_w: b.add(
                format!("{pre}.in.weight"),
                vec![h, e, 1],
                Init::Uniform { fan_in: e },
            ),
            in_b: b.add(format!("{pre}.in.bias"), vec![h], Init::Const(0.0)),
            alpha1: b.add(format!("{pre}.prelu1"), vec![1], Init::Const(0.25)),
            norm1: b.norm(&format!("{pre}.norm1"), h, mode),
            dconv_w: b.add(
                format!("{pre}.dconv.weight"),
                vec![h, 1, k],
                Init::Uniform { fan_in: k },
            ),
            dconv_b: b.add(format!("{pre}.dconv.bias"), vec![h], Init::Const(0.0)),
            alpha2: b.add(format!("{pre}.prelu2"), vec![1], Init::Const(0.25)),
            norm2: b.norm(&format!("{pre}.norm2"), h, mode),
            res_w: b.add(
                format!("{pre}.res.weight"),
                vec![e, h, 1],
                Init::Uniform { fan_in: h },
            ),
            res_b: b.add(format!("{pre}.res.bias"), vec![e], Init::Const(0.0)),
            skip_w: b.add(
                format!("{pre}.skip.weight"),
                vec![p, h, 1],
                Init::Uniform { fan_in: h },
            ),
            skip_b: b.add(format!("{pre}.skip.bias"), vec![p], Init::Const(0.0)),
        });
    }
    let dims = [
        (config.feature_channels(), config.hidden1),
        (config.hidden1, config.hidden2),
        (config.hidden2, config.classes),
    ];
    let linear = std::array::from_fn(|i| {
        let (din, dout) = dims[i];
        (
            b.add(
                format!("classifier.{i}.weight"),
                vec![dout, din],
                Init::Uniform { fan_in: din },
            ),
            b.add(format!("classifier.{i}.bias"), vec![dout], Init::Const(0.0)),
        )
    });
    (
        Layout {
            encoder,
            bottleneck_norm,
            bottleneck_w,
            bottleneck_b,
            blocks,
            linear,
        },
        b.specs,
    )
}

/// An MSTCN with its parameters.
///
/// A frozen model is `Sync`; any number of [`Session`]s may read it at once.
#[derive(Clone, Debug)]
pub struct Mstcn<F: Float = f32> {
    config: ModelConfig,
    names: Vec<String>,
    params: Vec<Tensor<F>>,
    layout: Layout,
}

/// Dense `[channels × frames]` feature map.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap<F = f32> {
    pub channels: usize,
    pub frames: usize,
    pub values: Tensor<F>,
}

impl<F: Float> FeatureMap<F> {
    pub fn new(values: Tensor<F>) -> Result<Self> {
        let (channels, frames) = values.dims2("feature map")?;
        Ok(Self {
            channels,
            frames,
            values,
        })
    }

    pub fn get(&self, channel: usize, frame: usize) -> F {
        self.values.values()[channel * self.frames + frame]
    }
}

impl<F: Float> Mstcn<F> {
    /// Freshly initialised model: conv/linear weights ~ U(±1/√fan_in), biases
    /// 0, PReLU slopes 0.25, norm gains 1 and biases 0.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (layout, specs) = layout(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut names = Vec::with_capacity(specs.len());
        let mut params = Vec::with_capacity(specs.len());
        for (name, shape, init) in specs {
            let len: usize = shape.iter().product();
            let values: Vec<F> = match init {
                Init::Const(v) => vec![F::of(v); len],
                Init::Uniform { fan_in } => {
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    (0..len)
                        .map(|_| F::of(rng.gen_range(-bound..bound)))
                        .collect()
                }
            };
            names.push(name);
            params.push(Tensor::new(shape, values)?.with_requires_grad(true));
        }
        Ok(Self {
            config,
            names,
            params,
            layout,
        })
    }

    /// Rebuilds a model from named tensors, checking names and shapes.
    pub fn from_named(config: ModelConfig, named: Vec<(String, Tensor<F>)>) -> Result<Self> {
        config.validate()?;
        let (layout, specs) = layout(&config);
        if specs.len() != named.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter tensors, found {}",
                specs.len(),
                named.len()
            )));
        }
        let mut names = Vec::with_capacity(specs.len());
        let mut params = Vec::with_capacity(specs.len());
        for ((want_name, want_shape, _), (name, tensor)) in specs.into_iter().zip(named) {
            if want_name != name {
                return Err(Error::Checkpoint(format!(
                    "expected tensor {want_name}, found {name}"
                )));
            }
            if tensor.shape() != want_shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "{name}: expected shape {want_shape:?}, found {:?}",
                    tensor.shape()
                )));
            }
            names.push(name);
            params.push(tensor.with_requires_grad(true));
        }
        Ok(Self {
            config,
            names,
            params,
            layout,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor<F>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<F>] {
        &mut self.params
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn named_params(&self) -> impl Iterator<Item = (&str, &Tensor<F>)> {
        self.names.iter().map(String::as_str).zip(&self.params)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor<F>> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(&mut self.params[i])
    }

    /// Number of scalars across all parameter tensors.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn cast<G: Float>(&self) -> Mstcn<G> {
        Mstcn {
            config: self.config.clone(),
            names: self.names.clone(),
            params: self.params.iter().map(Tensor::cast).collect(),
            layout: self.layout.clone(),
        }
    }

    pub fn session(&self) -> Session<'_, F> {
        Session::new(self)
    }

    /// Class probabilities `[assistant, expert]` for one window of audio.
    pub fn predict(&self, audio: &[F]) -> Result<[F; 2]> {
        let mut s = self.session();
        let probs = s.forward(audio)?;
        let v = s.tape().value(probs).values();
        Ok([v[0], v[1]])
    }

    /// Encoder → bottleneck → extractor features for `audio`.
    pub fn features(&self, audio: &[F]) -> Result<FeatureMap<F>> {
        let mut s = self.session();
        let w = s.encode(audio)?;
        let b = s.bottleneck(w)?;
        let f = s.extract(b)?;
        s.feature_map(f)
    }
}

impl Mstcn<f32> {
    pub fn classify_window(&self, audio: &[f32]) -> Result<(Category, [f32; 2])> {
        let probs = self.predict(audio)?;
        Ok((decode(probs, self.config.threshold), probs))
    }
}

/// The model's parameters bound as variables on some tape. The forward
/// stages take the tape explicitly so a caller may record extra ops around
/// them.
pub struct Bound<'m, F: Float> {
    model: &'m Mstcn<F>,
    vars: Vec<Var>,
}

impl<'m, F: Float> Bound<'m, F> {
    /// Binds every parameter as an owned, gradient-tracking copy.
    pub fn owned(model: &'m Mstcn<F>, tape: &mut Tape<'_, F>) -> Result<Self> {
        let vars = model
            .params
            .iter()
            .map(|p| tape.leaf(p.clone().with_requires_grad(true)))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { model, vars })
    }

    /// Tape variable bound to parameter `index`.
    pub fn param_var(&self, index: usize) -> Var {
        self.vars[index]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    fn cfg(&self) -> &'m ModelConfig {
        &self.model.config
    }

    fn p(&self, index: usize) -> Var {
        self.vars[index]
    }

    fn channels(
        &self,
        tape: &Tape<'_, F>,
        v: Var,
        stage: &'static str,
        expected: usize,
    ) -> Result<()> {
        let (found, _) = tape.value(v).dims2(stage)?;
        if found != expected {
            return Err(Error::Channels {
                stage,
                expected,
                found,
            });
        }
        Ok(())
    }

    fn norm(&self, tape: &mut Tape<'_, F>, x: Var, idx: Option<NormIdx>) -> Result<Var> {
        let Some(n) = idx else { return Ok(x) };
        let (g, b) = (self.p(n.gain), self.p(n.bias));
        Ok(match self.cfg().norm_mode {
            NormMode::Gln => tape.global_layer_norm(x, g, b)?,
            NormMode::Cln => tape.cumulative_layer_norm(x, g, b)?,
            NormMode::None => x,
        })
    }

    /// ReLU of overlapping `L`-sample frames projected on the `N×L` basis.
    pub fn encode(&self, tape: &mut Tape<'_, F>, audio: &[F]) -> Result<Var> {
        let cfg = self.cfg();
        let (l, hop) = (cfg.filter_len, cfg.stride);
        let frames = cfg.frames(audio.len()).ok_or(Error::AudioTooShort {
            found: audio.len(),
            min: l,
        })?;
        let mut cols = vec![F::zero(); l * frames];
        for t in 0..frames {
            for (i, &s) in audio[t * hop..t * hop + l].iter().enumerate() {
                cols[i * frames + t] = s;
            }
        }
        let x = tape.constant(Tensor::new(vec![l, frames], cols)?)?;
        let proj = tape.matmul(self.p(self.model.layout.encoder), x)?;
        Ok(tape.relu(proj))
    }

    /// Normalization then a 1×1 convolution from `N` to `E` channels.
    pub fn bottleneck(&self, tape: &mut Tape<'_, F>, w: Var) -> Result<Var> {
        self.channels(tape, w, "bottleneck", self.cfg().filters)?;
        let lay = &self.model.layout;
        let normed = self.norm(tape, w, lay.bottleneck_norm)?;
        let (cw, cb) = (self.p(lay.bottleneck_w), self.p(lay.bottleneck_b));
        Ok(tape.conv1d(normed, cw, Some(cb), Conv1dSpec::pointwise())?)
    }

    /// One dilated depthwise-separable block; returns `(residual, skip)`.
    pub fn conv_block(&self, tape: &mut Tape<'_, F>, x: Var, index: usize) -> Result<(Var, Var)> {
        let cfg = self.cfg();
        self.channels(tape, x, "conv_block", cfg.bottleneck_channels)?;
        let blk = self.model.layout.blocks[index];
        let pw = Conv1dSpec::pointwise();

        let h = tape.conv1d(x, self.p(blk.in_w), Some(self.p(blk.in_b)), pw)?;
        let h = tape.prelu(h, self.p(blk.alpha1))?;
        let h = self.norm(tape, h, blk.norm1)?;
        let dw = Conv1dSpec::depthwise(
            cfg.hidden_channels,
            cfg.dilation(index),
            cfg.block_padding(index),
        );
        let h = tape.conv1d(h, self.p(blk.dconv_w), Some(self.p(blk.dconv_b)), dw)?;
        let h = tape.prelu(h, self.p(blk.alpha2))?;
        let h = self.norm(tape, h, blk.norm2)?;
        let res = tape.conv1d(h, self.p(blk.res_w), Some(self.p(blk.res_b)), pw)?;
        let skip = tape.conv1d(h, self.p(blk.skip_w), Some(self.p(blk.skip_b)), pw)?;
        let out = tape.add(x, res)?;
        Ok((out, skip))
    }

    /// Runs all `M·R` blocks and concatenates their skip outputs in
    /// repeat-major order (or returns only the last one).
    pub fn extract(&self, tape: &mut Tape<'_, F>, b: Var) -> Result<Var> {
        self.channels(tape, b, "extract", self.cfg().bottleneck_channels)?;
        let mut x = b;
        let mut skips = Vec::with_capacity(self.cfg().block_count());
        for i in 0..self.cfg().block_count() {
            let (res, skip) = self.conv_block(tape, x, i)?;
            x = res;
            skips.push(skip);
        }
        Ok(match self.cfg().features_mode {
            FeaturesMode::Multiscale if skips.len() > 1 => tape.concat_rows(&skips)?,
            _ => *skips.last().expect("at least one block"),
        })
    }

    /// Temporal mean pool, two ReLU hidden layers, per-class output
    /// activation. Returns the probability vector.
    pub fn classify(&self, tape: &mut Tape<'_, F>, features: Var) -> Result<Var> {
        self.channels(tape, features, "classify", self.cfg().feature_channels())?;
        let mut h = tape.mean_time(features)?;
        for (i, &(w, b)) in self.model.layout.linear.iter().enumerate() {
            h = tape.linear(h, self.p(w), self.p(b))?;
            if i < 2 {
                h = tape.relu(h);
            }
        }
        Ok(match self.cfg().output_activation {
            OutputActivation::Sigmoid => tape.sigmoid(h),
            OutputActivation::Softmax => tape.softmax(h)?,
        })
    }

    /// Full pipeline from audio to probabilities.
    pub fn forward(&self, tape: &mut Tape<'_, F>, audio: &[F]) -> Result<Var> {
        let w = self.encode(tape, audio)?;
        let b = self.bottleneck(tape, w)?;
        let f = self.extract(tape, b)?;
        self.classify(tape, f)
    }
}

/// A forward pass recorded on its own tape, with every parameter bound as a
/// borrowed leaf (no copies).
pub struct Session<'p, F: Float> {
    tape: Tape<'p, F>,
    net: Bound<'p, F>,
}

impl<'p, F: Float> Session<'p, F> {
    pub fn new(model: &'p Mstcn<F>) -> Self {
        let mut tape = Tape::new();
        let vars = model.params.iter().map(|p| tape.param(p)).collect();
        Self {
            tape,
            net: Bound { model, vars },
        }
    }

    pub fn tape(&self) -> &Tape<'p, F> {
        &self.tape
    }

    pub fn tape_mut(&mut self) -> &mut Tape<'p, F> {
        &mut self.tape
    }

    pub fn param_var(&self, index: usize) -> Var {
        self.net.param_var(index)
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        self.tape.value(v)
    }

    pub fn feature_map(&self, v: Var) -> Result<FeatureMap<F>> {
        FeatureMap::new(self.tape.value(v).clone())
    }

    pub fn encode(&mut self, audio: &[F]) -> Result<Var> {
        self.net.encode(&mut self.tape, audio)
    }

    pub fn bottleneck(&mut self, w: Var) -> Result<Var> {
        self.net.bottleneck(&mut self.tape, w)
    }

    pub fn conv_block(&mut self, x: Var, index: usize) -> Result<(Var, Var)> {
        self.net.conv_block(&mut self.tape, x, index)
    }

    pub fn extract(&mut self, b: Var) -> Result<Var> {
        self.net.extract(&mut self.tape, b)
    }

    pub fn classify(&mut self, features: Var) -> Result<Var> {
        self.net.classify(&mut self.tape, features)
    }

    pub fn forward(&mut self, audio: &[F]) -> Result<Var> {
        self.net.forward(&mut self.tape, audio)
    }

    /// Summed per-class binary cross-entropy.
    pub fn loss(&mut self, probs: Var, target: &[F]) -> Result<Var> {
        Ok(self.tape.binary_cross_entropy(probs, target)?)
    }

    /// Backpropagates `loss` and returns each parameter's gradient in
    /// parameter order.
    pub fn param_grads(&self, loss: Var) -> Result<Vec<Option<Vec<F>>>> {
        let mut grads = self.tape.backward(loss)?;
        Ok(self.net.vars.iter().map(|&v| grads.take(v)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::super::config::param_count;
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            filter_len: 16,
            stride: 8,
            filters: 6,
            bottleneck_channels: 4,
            skip_channels: 3,
            hidden_channels: 5,
            kernel_size: 3,
            blocks_per_repeat: 2,
            repeats: 2,
            hidden1: 7,
            hidden2: 6,
            ..ModelConfig::full()
        }
    }

    #[test]
    fn param_count_matches_enumeration() {
        for mode in [NormMode::Cln, NormMode::None] {
            for fm in [FeaturesMode::Multiscale, FeaturesMode::LastLayer] {
                let cfg = ModelConfig {
                    norm_mode: mode,
                    features_mode: fm,
                    ..tiny()
                };
                let m = Mstcn::<f32>::new(cfg.clone(), 1).unwrap();
                assert_eq!(m.num_scalars(), param_count(&cfg));
            }
        }
    }

    #[test]
    fn encoder_param_count() {
        let m = Mstcn::<f32>::new(ModelConfig::reduced(), 0).unwrap();
        let enc = m
            .named_params()
            .find(|(n, _)| *n == "encoder.basis")
            .unwrap()
            .1;
        assert_eq!(enc.len(), 64 * 160);
        assert_eq!(
            ModelConfig::full().filters * ModelConfig::full().filter_len,
            81_920
        );
    }

    #[test]
    fn encode_shapes_and_zero_audio() {
        let m = Mstcn::<f32>::new(tiny(), 3).unwrap();
        let mut s = m.session();
        let w = s.encode(&[0.0; 40]).unwrap();
        assert_eq!(s.tape().value(w).shape(), &[6, 4]);
        assert!(s.tape().value(w).values().iter().all(|&v| v == 0.0));
        assert!(matches!(
            s.encode(&[0.0; 15]),
            Err(Error::AudioTooShort { min: 16, .. })
        ));
    }

    #[test]
    fn encoder_output_non_negative() {
        let m = Mstcn::<f32>::new(tiny(), 4).unwrap();
        let audio: Vec<f32> = (0..200)
            .map(|i| ((i * 37 % 101) as f32 / 50.0) - 1.0)
            .collect();
        let mut s = m.session();
        let w = s.encode(&audio).unwrap();
        assert!(s.tape().value(w).values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn channel_mismatch_is_reported() {
        let m = Mstcn::<f32>::new(tiny(), 5).unwrap();
        let mut s = m.session();
        let x = s.tape_mut().constant(Tensor::zeros(vec![3, 10])).unwrap();
        assert!(matches!(
            s.bottleneck(x),
            Err(Error::Channels {
                expected: 6,
                found: 3,
                ..
            })
        ));
        assert!(matches!(
            s.conv_block(x, 0),
            Err(Error::Channels { expected: 4, .. })
        ));
        assert!(matches!(s.classify(x), Err(Error::Channels { .. })));
    }

    #[test]
    fn zero_block_weights_give_identity_residual() {
        let mut m = Mstcn::<f64>::new(tiny(), 6).unwrap();
        let names: Vec<String> = m
            .names()
            .iter()
            .filter(|n| n.starts_with("blocks.0.0."))
            .cloned()
            .collect();
        for n in &names {
            if n.ends_with("weight") {
                let p = m.param_mut(n).unwrap();
                p.values_mut().iter_mut().for_each(|v| *v = 0.0);
            }
        }
        m.param_mut("blocks.0.0.skip.bias")
            .unwrap()
            .values_mut()
            .copy_from_slice(&[0.5, -1.0, 2.0]);
        let mut s = m.session();
        let x_vals: Vec<f64> = (0..4 * 9).map(|i| (i as f64 * 0.3).sin()).collect();
        let x = s
            .tape_mut()
            .constant(Tensor::new(vec![4, 9], x_vals.clone()).unwrap())
            .unwrap();
        let (res, skip) = s.conv_block(x, 0).unwrap();
        assert_eq!(s.tape().value(res).values(), &x_vals[..]);
        let skip = s.tape().value(skip).values();
        for (ch, want) in [0.5, -1.0, 2.0].into_iter().enumerate() {
            assert!(skip[ch * 9..(ch + 1) * 9].iter().all(|&v| v == want));
        }
    }

    #[test]
    fn probabilities_in_unit_interval() {
        let m = Mstcn::<f32>::new(tiny(), 7).unwrap();
        let audio: Vec<f32> = (0..300).map(|i| (i as f32 * 0.05).sin() * 0.3).collect();
        let p = m.predict(&audio).unwrap();
        assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn seed_determines_initialisation() {
        let a = Mstcn::<f32>::new(tiny(), 9).unwrap();
        let b = Mstcn::<f32>::new(tiny(), 9).unwrap();
        let c = Mstcn::<f32>::new(tiny(), 10).unwrap();
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), c.params());
    }
}
