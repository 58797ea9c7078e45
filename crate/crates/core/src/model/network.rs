use super::ModelSpec;
use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::nn::{downsample, Block, Initializer, Upsample};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone)]
struct Layout {
    encoders: Vec<Block>,
    bottleneck: Block,
    /// Indexed by level, like `decoders`.
    ups: Vec<Upsample>,
    decoders: Vec<Block>,
    head_w: ParamId,
    head_b: ParamId,
}

/// An encoder-decoder segmentation network and its parameters.
///
/// Encoder level `l` feeds its block output both to the 2x2 pooling and,
/// through a skip, to decoder level `l`, where it is concatenated (encoder
/// channels first) with the up-convolved features. A 1x1 convolution and a
/// sigmoid produce per-pixel probabilities.
#[derive(Debug, Clone)]
pub struct Model<T> {
    spec: ModelSpec,
    layout: Layout,
    pub params: ParamStore<T>,
}

impl<T: Scalar> Model<T> {
    /// Parameters are drawn from one seeded stream in registration order.
    pub fn build(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut store = ParamStore::new();
        let mut init = Initializer::new(seed);
        let depth = spec.poolings();

        let encoders = (0..depth)
            .map(|l| Block::register(&mut store, &mut init, &format!("enc{l}"), spec.encoder_block(l)))
            .collect::<Result<Vec<_>>>()?;
        let bottleneck = Block::register(&mut store, &mut init, "bottleneck", spec.bottleneck_block())?;
        let mut ups = Vec::with_capacity(depth);
        let mut decoders = Vec::with_capacity(depth);
        for l in (0..depth).rev() {
            ups.push(Upsample::register(
                &mut store,
                &mut init,
                &format!("up{l}"),
                spec.schedule[l + 1],
                spec.schedule[l],
            )?);
            decoders.push(Block::register(&mut store, &mut init, &format!("dec{l}"), spec.decoder_block(l))?);
        }
        ups.reverse();
        decoders.reverse();
        let c0 = spec.schedule[0];
        let head_w = init.linear_kernel(&mut store, "head.w".into(), [spec.out_channels, c0, 1, 1], c0)?;
        let head_b = init.bias(&mut store, "head.b".into(), spec.out_channels)?;

        Ok(Self {
            spec,
            layout: Layout {
                encoders,
                bottleneck,
                ups,
                decoders,
                head_w,
                head_b,
            },
            params: store,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn check_input(&self, shape: &[usize]) -> Result<()> {
        let [_, c, h, w] = shape else {
            return Err(Error::Shape {
                op: "model",
                detail: format!("expected NCHW input, got {shape:?}"),
            });
        };
        if *c != self.spec.in_channels {
            return Err(Error::Dimension {
                op: "model",
                dim: "input channels",
                expected: self.spec.in_channels,
                found: *c,
            });
        }
        let divisor = self.spec.divisor();
        for (dim, extent) in [("height", *h), ("width", *w)] {
            if extent % divisor != 0 {
                return Err(Error::Indivisible { dim, extent, divisor });
            }
        }
        Ok(())
    }

    /// Records the forward pass; `params` come from [`Tape::bind`] on
    /// `self.params`.
    pub fn forward(&self, tape: &mut Tape<T>, params: &[Var], x: Var) -> Result<Var> {
        self.check_input(tape.value(x).shape())?;
        let l = &self.layout;
        let mut skips = Vec::with_capacity(l.encoders.len());
        let mut h = x;
        for enc in &l.encoders {
            h = enc.forward(tape, params, h)?;
            skips.push(h);
            h = downsample(tape, h)?;
        }
        h = l.bottleneck.forward(tape, params, h)?;
        for level in (0..l.decoders.len()).rev() {
            let up = l.ups[level].forward(tape, params, h)?;
            let cat = tape.concat_channels(skips[level], up)?;
            h = l.decoders[level].forward(tape, params, cat)?;
        }
        let logits = tape.conv2d(h, params[l.head_w.index()], Some(params[l.head_b.index()]), 1, 0)?;
        tape.sigmoid(logits)
    }

    /// Forward pass on a fresh tape, returning the probability map.
    pub fn predict(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let params = tape.bind(&self.params)?;
        let x = tape.constant(input.clone())?;
        let y = self.forward(&mut tape, &params, x)?;
        Ok(tape.value(y).clone())
    }

    /// Same architecture and values in another precision.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            spec: self.spec.clone(),
            layout: self.layout.clone(),
            params: self.params.cast(),
        }
    }
}
