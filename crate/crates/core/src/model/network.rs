//! Layer structure of the residual U-Net and its forward pass on a [`Graph`].

use super::layout::{Init, ParamLayout};
use super::{Architecture, Block, BlockKind, ModelConfig, ModelError};
use crate::tensor::{Graph, Scalar, Tensor, Var};

/// conv -> instance norm -> PReLU
#[derive(Debug, Clone)]
struct ConvNormAct {
    weight: usize,
    gamma: usize,
    beta: usize,
    slope: usize,
}

/// Two conv/norm/PReLU sequences plus a shortcut. The shortcut is the
/// identity when channels and resolution are unchanged and a 1x1 convolution
/// with the unit's stride otherwise.
#[derive(Debug, Clone)]
pub struct ResidualUnit {
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    first: ConvNormAct,
    second: ConvNormAct,
    shortcut: Option<(usize, usize)>,
}

impl ResidualUnit {
    pub fn has_projection(&self) -> bool {
        self.shortcut.is_some()
    }
}

/// Transposed convolution -> instance norm -> PReLU, doubling the resolution.
#[derive(Debug, Clone)]
struct Upsample {
    weight: usize,
    gamma: usize,
    beta: usize,
    slope: usize,
}

#[derive(Debug)]
pub(crate) struct Network {
    pub config: ModelConfig,
    pub layout: ParamLayout,
    pub architecture: Architecture,
    encoders: Vec<ResidualUnit>,
    bottom: ResidualUnit,
    decoders: Vec<ResidualUnit>,
    ups: Vec<Upsample>,
    head: (usize, usize),
}

fn conv_norm_act(
    layout: &mut ParamLayout,
    prefix: &str,
    in_c: usize,
    out_c: usize,
    k: usize,
    slope: f64,
) -> ConvNormAct {
    ConvNormAct {
        weight: layout.push(
            format!("{prefix}.conv.weight"),
            vec![out_c, in_c, k, k],
            Init::PreNorm { fan_in: in_c * k * k },
        ),
        gamma: layout.push(format!("{prefix}.norm.gamma"), vec![out_c], Init::Constant(1.0)),
        beta: layout.push(format!("{prefix}.norm.beta"), vec![out_c], Init::Constant(0.0)),
        slope: layout.push(format!("{prefix}.act.slope"), vec![out_c], Init::Constant(slope)),
    }
}

fn residual_unit(
    layout: &mut ParamLayout,
    prefix: &str,
    in_c: usize,
    out_c: usize,
    stride: usize,
    cfg: &ModelConfig,
) -> ResidualUnit {
    let k = cfg.kernel_size;
    let first = conv_norm_act(layout, &format!("{prefix}.a"), in_c, out_c, k, cfg.prelu_init);
    let second = conv_norm_act(layout, &format!("{prefix}.b"), out_c, out_c, k, cfg.prelu_init);
    let shortcut = (in_c != out_c || stride != 1).then(|| {
        (
            layout.push(format!("{prefix}.shortcut.weight"), vec![out_c, in_c, 1, 1], Init::He { fan_in: in_c }),
            layout.push(format!("{prefix}.shortcut.bias"), vec![out_c], Init::Constant(0.0)),
        )
    });
    ResidualUnit { in_channels: in_c, out_channels: out_c, stride, first, second, shortcut }
}

impl Network {
    pub fn new(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let ch = &config.encode_channels;
        let levels = config.downsamplings();
        let s = config.down_stride;
        let k = config.kernel_size;
        let mut layout = ParamLayout::default();
        let mut blocks = Vec::new();

        let mut encoders = Vec::with_capacity(levels);
        let mut prev = config.input_channels;
        for (i, &c) in ch[..levels].iter().enumerate() {
            encoders.push(residual_unit(&mut layout, &format!("enc{i}"), prev, c, s, &config));
            blocks.push(Block::new(format!("enc{i}"), BlockKind::Encode, prev, c, s));
            prev = c;
        }
        let bottom = residual_unit(&mut layout, "bottom", prev, ch[levels], 1, &config);
        blocks.push(Block::new("bottom".into(), BlockKind::Bottom, prev, ch[levels], 1));

        // Decode from the deepest level up: concat skip, residual unit, upsample.
        let mut decoders = vec![None; levels];
        let mut ups = vec![None; levels];
        let mut below = ch[levels];
        for i in (0..levels).rev() {
            let skip = ch[i];
            decoders[i] = Some(residual_unit(&mut layout, &format!("dec{i}"), below + skip, skip, 1, &config));
            blocks.push(Block::new(format!("dec{i}"), BlockKind::Decode, below + skip, skip, 1));
            let out = if i == 0 { skip } else { ch[i - 1] };
            ups[i] = Some(Upsample {
                weight: layout.push(
                    format!("up{i}.weight"),
                    vec![skip, out, k, k],
                    Init::PreNorm { fan_in: skip * k * k },
                ),
                gamma: layout.push(format!("up{i}.norm.gamma"), vec![out], Init::Constant(1.0)),
                beta: layout.push(format!("up{i}.norm.beta"), vec![out], Init::Constant(0.0)),
                slope: layout.push(format!("up{i}.act.slope"), vec![out], Init::Constant(config.prelu_init)),
            });
            blocks.push(Block::new(format!("up{i}"), BlockKind::Upsample, skip, out, s));
            below = out;
        }
        let head = (
            layout.push("head.weight".into(), vec![config.output_channels, ch[0], 1, 1], Init::He { fan_in: ch[0] }),
            layout.push("head.bias".into(), vec![config.output_channels], Init::Constant(0.0)),
        );
        blocks.push(Block::new("head".into(), BlockKind::Head, ch[0], config.output_channels, 1));

        Ok(Self {
            config,
            layout,
            architecture: Architecture { blocks },
            encoders,
            bottom,
            decoders: decoders.into_iter().map(Option::unwrap).collect(),
            ups: ups.into_iter().map(Option::unwrap).collect(),
            head,
        })
    }

    pub fn residual_units(&self) -> impl Iterator<Item = &ResidualUnit> {
        self.encoders.iter().chain(std::iter::once(&self.bottom)).chain(self.decoders.iter())
    }

    fn p<T: Scalar>(&self, g: &mut Graph<T>, params: Var, idx: usize) -> Result<Var, ModelError> {
        let e = self.layout.entry(idx);
        Ok(g.view(params, e.offset, &e.dims)?)
    }

    fn conv_norm_act<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        params: Var,
        x: Var,
        u: &ConvNormAct,
        stride: usize,
    ) -> Result<Var, ModelError> {
        let pad = (self.config.kernel_size - 1) / 2;
        let w = self.p(g, params, u.weight)?;
        let y = g.conv2d(x, w, None, stride, pad)?;
        let (gamma, beta) = (self.p(g, params, u.gamma)?, self.p(g, params, u.beta)?);
        let y = g.instance_norm(y, gamma, beta, self.config.norm_epsilon)?;
        let slope = self.p(g, params, u.slope)?;
        Ok(g.prelu(y, slope)?)
    }

    fn residual<T: Scalar>(&self, g: &mut Graph<T>, params: Var, x: Var, u: &ResidualUnit) -> Result<Var, ModelError> {
        let main = self.conv_norm_act(g, params, x, &u.first, u.stride)?;
        let main = self.conv_norm_act(g, params, main, &u.second, 1)?;
        let short = match u.shortcut {
            Some((w, b)) => {
                let (w, b) = (self.p(g, params, w)?, self.p(g, params, b)?);
                g.conv2d(x, w, Some(b), u.stride, 0)?
            }
            None => x,
        };
        Ok(g.add(main, short)?)
    }

    /// Probability map for `input [B, Cin, H, W]` whose spatial dims already
    /// satisfy [`ModelConfig::padded_dims`].
    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, params: Var, input: Var) -> Result<Var, ModelError> {
        let mut x = input;
        let mut skips = Vec::with_capacity(self.encoders.len());
        for enc in &self.encoders {
            x = self.residual(g, params, x, enc)?;
            skips.push(x);
        }
        x = self.residual(g, params, x, &self.bottom)?;
        let pad = (self.config.kernel_size - 1) / 2;
        for i in (0..self.encoders.len()).rev() {
            x = g.concat_channels(x, skips[i])?;
            x = self.residual(g, params, x, &self.decoders[i])?;
            let up = &self.ups[i];
            let w = self.p(g, params, up.weight)?;
            x = g.conv_transpose2d(x, w, None, self.config.down_stride, pad)?;
            let (gamma, beta) = (self.p(g, params, up.gamma)?, self.p(g, params, up.beta)?);
            x = g.instance_norm(x, gamma, beta, self.config.norm_epsilon)?;
            let slope = self.p(g, params, up.slope)?;
            x = g.prelu(x, slope)?;
        }
        let (w, b) = (self.p(g, params, self.head.0)?, self.p(g, params, self.head.1)?);
        let logits = g.conv2d(x, w, Some(b), 1, 0)?;
        Ok(g.sigmoid(logits))
    }

    /// Like [`Network::forward`] but accepts any spatial dims: the input is
    /// reflection-padded symmetrically and the output cropped back.
    pub fn forward_any<T: Scalar>(&self, g: &mut Graph<T>, params: Var, input: &Tensor<T>) -> Result<Var, ModelError> {
        let d = input.dims();
        if d.len() != 4 || d[1] != self.config.input_channels {
            return Err(ModelError::InputShape { expected_channels: self.config.input_channels, got: d.to_vec() });
        }
        if !input.is_finite() {
            return Err(ModelError::NonFiniteInput);
        }
        let (h, w) = (d[2], d[3]);
        let (ph, pw) = self.config.padded_dims(h, w);
        if (ph, pw) == (h, w) {
            let x = g.leaf(input.clone(), false);
            return self.forward(g, params, x);
        }
        let (top, left) = ((ph - h) / 2, (pw - w) / 2);
        let padded = reflect_pad(input, ph, pw, top, left);
        let x = g.leaf(padded, false);
        let y = self.forward(g, params, x)?;
        Ok(g.crop2d(y, top, left, h, w)?)
    }
}

fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// Symmetric reflection padding (edge sample not repeated) of each plane to
/// `ph x pw`, with the original placed at `(top, left)`.
pub(crate) fn reflect_pad<T: Scalar>(x: &Tensor<T>, ph: usize, pw: usize, top: usize, left: usize) -> Tensor<T> {
    let d = x.dims();
    let (h, w) = (d[2], d[3]);
    let mut out = Vec::with_capacity(d[0] * d[1] * ph * pw);
    for plane in x.data().chunks(h * w) {
        for r in 0..ph {
            let sr = reflect(r as isize - top as isize, h);
            for c in 0..pw {
                out.push(plane[sr * w + reflect(c as isize - left as isize, w)]);
            }
        }
    }
    Tensor::new(vec![d[0], d[1], ph, pw], out).expect("consistent dims")
}
