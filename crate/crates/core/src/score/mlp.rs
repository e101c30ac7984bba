//! Small windowed MLP score network with hand-written backpropagation.
//!
//! Each position is scored independently from a window of `2r + 1`
//! neighbouring tokens (one-hot, with a padding token past the sequence
//! ends) concatenated with sinusoidal features of the noise level. The
//! output head emits one log-ratio per per-token state; ratios are its
//! exponential, so they are positive by construction.

use std::path::Path;

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Ratios, ScoreModel};
use crate::ctmc::{DiffusionConfig, NoiseSchedule, RateKernel};
use crate::error::{Error, Result};
use crate::io;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArch {
    /// Per-token states, mask included.
    pub num_states: usize,
    pub window_radius: usize,
    /// Even number of sinusoidal time features.
    pub time_features: usize,
    pub hidden: Vec<usize>,
}

impl MlpArch {
    pub fn new(num_states: usize, window_radius: usize, time_features: usize, hidden: Vec<usize>) -> Result<Self> {
        if num_states < 2 {
            return Err(Error::config("score network needs at least two states"));
        }
        if !time_features.is_multiple_of(2) {
            return Err(Error::config("time_features must be even"));
        }
        if hidden.contains(&0) {
            return Err(Error::config("hidden widths must be positive"));
        }
        Ok(MlpArch { num_states, window_radius, time_features, hidden })
    }

    pub fn window(&self) -> usize {
        2 * self.window_radius + 1
    }

    /// One-hot width of a window slot (states plus padding).
    pub fn slot_width(&self) -> usize {
        self.num_states + 1
    }

    fn pad_token(&self) -> usize {
        self.num_states
    }

    pub fn input_dim(&self) -> usize {
        self.window() * self.slot_width() + self.time_features
    }

    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input_dim();
        for &h in self.hidden.iter().chain(std::iter::once(&self.num_states)) {
            dims.push((prev, h));
            prev = h;
        }
        dims
    }
}

/// Fully connected layer; `w` is `inputs x outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub arch: MlpArch,
    pub seed: u64,
    pub layers: Vec<Dense>,
}

/// Network inputs for a batch of scored positions.
#[derive(Debug, Clone)]
pub struct RowInputs {
    /// `rows x window` token indices (padding = `num_states`).
    pub tokens: Array2<usize>,
    /// `rows x time_features`.
    pub time: Array2<f64>,
}

pub(crate) struct ForwardCache {
    pre: Vec<Array2<f64>>,
    act: Vec<Array2<f64>>,
    pub(crate) out: Array2<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// Sinusoidal features of the normalized log cumulative noise.
pub fn time_features(noise: &NoiseSchedule, t: f64, count: usize) -> Vec<f64> {
    let lo = noise.sigma_bar(super::TIME_FLOOR).ln();
    let hi = noise.sigma_bar(1.0).ln();
    let sb = noise.sigma_bar(t);
    let u = if sb > 0.0 { ((sb.ln() - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
    let mut out = Vec::with_capacity(count);
    for k in 0..count / 2 {
        let w = std::f64::consts::PI * (k + 1) as f64 / 2.0;
        out.push((w * u).sin());
        out.push((w * u).cos());
    }
    out
}

impl MlpParams {
    pub fn zeros(arch: MlpArch) -> Self {
        let layers = arch
            .layer_dims()
            .into_iter()
            .map(|(i, o)| Dense { w: Array2::zeros((i, o)), b: Array1::zeros(o) })
            .collect();
        MlpParams { arch, seed: 0, layers }
    }

    /// Uniform Glorot-style initialization; the output head starts small so
    /// initial ratios are close to 1.
    pub fn init(arch: MlpArch, seed: u64) -> Self {
        let mut rng = rng::stream(seed, rng::domain::INIT, 0);
        let mut params = MlpParams::zeros(arch);
        params.seed = seed;
        let active_inputs = (params.arch.window() + params.arch.time_features) as f64;
        let n_layers = params.layers.len();
        for (li, layer) in params.layers.iter_mut().enumerate() {
            let (fan_in, fan_out) = layer.w.dim();
            let fan_in = if li == 0 { active_inputs } else { fan_in as f64 };
            let mut bound = (6.0 / (fan_in + fan_out as f64)).sqrt();
            if li + 1 == n_layers {
                bound *= 0.1;
            }
            layer.w.mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        params
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Flat coordinate access in layer order (weights row-major, then bias).
    pub fn get(&self, mut idx: usize) -> f64 {
        for l in &self.layers {
            if idx < l.w.len() {
                return l.w.as_slice().expect("standard layout")[idx];
            }
            idx -= l.w.len();
            if idx < l.b.len() {
                return l.b[idx];
            }
            idx -= l.b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set(&mut self, mut idx: usize, value: f64) {
        for l in &mut self.layers {
            if idx < l.w.len() {
                l.w.as_slice_mut().expect("standard layout")[idx] = value;
                return;
            }
            idx -= l.w.len();
            if idx < l.b.len() {
                l.b[idx] = value;
                return;
            }
            idx -= l.b.len();
        }
        panic!("parameter index out of range");
    }

    /// Flat index ranges of each layer's weights and bias.
    pub fn layer_ranges(&self) -> Vec<(std::ops::Range<usize>, std::ops::Range<usize>)> {
        let mut start = 0;
        self.layers
            .iter()
            .map(|l| {
                let w = start..start + l.w.len();
                let b = w.end..w.end + l.b.len();
                start = b.end;
                (w, b)
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    pub(crate) fn check_shapes(&self) -> Result<()> {
        let dims = self.arch.layer_dims();
        if dims.len() != self.layers.len() {
            return Err(Error::config("layer count does not match architecture"));
        }
        for (k, ((i, o), l)) in dims.iter().zip(&self.layers).enumerate() {
            if l.w.dim() != (*i, *o) || l.b.len() != *o {
                return Err(Error::config(format!("layer {k} has shape {:?}, expected ({i}, {o})", l.w.dim())));
            }
        }
        Ok(())
    }

    /// Build the window inputs for `positions` of sequence `x`.
    pub fn row_inputs(&self, x: &[usize], positions: &[usize], time: &[f64]) -> Result<RowInputs> {
        let arch = &self.arch;
        if time.len() != arch.time_features {
            return Err(Error::config("time feature count does not match architecture"));
        }
        let r = arch.window_radius as isize;
        let mut tokens = Array2::from_elem((positions.len(), arch.window()), arch.pad_token());
        for (row, &pos) in positions.iter().enumerate() {
            if pos >= x.len() {
                return Err(Error::config(format!("position {pos} out of range for length {}", x.len())));
            }
            for (slot, off) in (-r..=r).enumerate() {
                let j = pos as isize + off;
                if j >= 0 && (j as usize) < x.len() {
                    let tok = x[j as usize];
                    if tok >= arch.num_states {
                        return Err(Error::StateOutOfRange { state: tok, num_states: arch.num_states });
                    }
                    tokens[[row, slot]] = tok;
                }
            }
        }
        let time = Array2::from_shape_fn((positions.len(), arch.time_features), |(_, f)| time[f]);
        Ok(RowInputs { tokens, time })
    }

    pub(crate) fn forward(&self, input: &RowInputs) -> ForwardCache {
        let arch = &self.arch;
        let n = input.tokens.nrows();
        let width = arch.slot_width();
        let emb_rows = arch.window() * width;
        let first = &self.layers[0];
        let mut pre0 = Array2::zeros((n, first.w.ncols()));
        if arch.time_features > 0 {
            pre0 = input.time.dot(&first.w.slice(s![emb_rows.., ..]));
        }
        for (row, mut out) in pre0.outer_iter_mut().enumerate() {
            for slot in 0..arch.window() {
                out += &first.w.row(slot * width + input.tokens[[row, slot]]);
            }
            out += &first.b;
        }

        let last = self.layers.len() - 1;
        let mut pre: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        let mut act: Vec<Array2<f64>> = Vec::with_capacity(last);
        let mut cur = pre0;
        for k in 0..=last {
            if k > 0 {
                let l = &self.layers[k];
                cur = act[k - 1].dot(&l.w) + &l.b;
            }
            if k < last {
                act.push(cur.mapv(silu));
            }
            pre.push(cur.clone());
        }
        let out = pre.pop().expect("at least one layer");
        ForwardCache { pre, act, out }
    }

    /// Gradient of `sum(d_out * out)` with respect to every parameter.
    pub(crate) fn backward(&self, input: &RowInputs, cache: &ForwardCache, d_out: &Array2<f64>) -> MlpParams {
        let arch = &self.arch;
        let mut grad = MlpParams::zeros(arch.clone());
        let last = self.layers.len() - 1;
        let mut delta = d_out.clone();
        for k in (0..=last).rev() {
            if k < last {
                delta.zip_mut_with(&cache.pre[k], |d, &z| *d *= silu_grad(z));
            }
            grad.layers[k].b = delta.sum_axis(Axis(0));
            if k > 0 {
                grad.layers[k].w = cache.act[k - 1].t().dot(&delta);
                delta = delta.dot(&self.layers[k].w.t());
            } else {
                let width = arch.slot_width();
                let emb_rows = arch.window() * width;
                let gw = &mut grad.layers[0].w;
                for (row, d) in delta.outer_iter().enumerate() {
                    for slot in 0..arch.window() {
                        let mut g = gw.row_mut(slot * width + input.tokens[[row, slot]]);
                        g += &d;
                    }
                }
                if arch.time_features > 0 {
                    let gt = input.time.t().dot(&delta);
                    gw.slice_mut(s![emb_rows.., ..]).assign(&gt);
                }
            }
        }
        grad
    }

    /// Raw log-ratio outputs, `rows x num_states`.
    pub fn log_ratios(&self, input: &RowInputs) -> Array2<f64> {
        self.forward(input).out
    }
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    rows: usize,
    cols: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    version: u32,
    format: String,
    arch: MlpArch,
    seed: u64,
    diffusion: DiffusionConfig,
    layers: Vec<LayerFile>,
}

const FORMAT_TAG: &str = "thermosched-mlp";

/// A trained network bound to the kernel and noise schedule it was trained for.
#[derive(Debug, Clone)]
pub struct MlpScore {
    params: MlpParams,
    kernel: RateKernel,
    noise: NoiseSchedule,
}

impl MlpScore {
    pub fn new(params: MlpParams, kernel: RateKernel, noise: NoiseSchedule) -> Result<Self> {
        params.check_shapes()?;
        if params.arch.num_states != kernel.num_states() {
            return Err(Error::config(format!(
                "network scores {} states, kernel has {}",
                params.arch.num_states,
                kernel.num_states()
            )));
        }
        Ok(MlpScore { params, kernel, noise })
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn into_params(self) -> MlpParams {
        self.params
    }

    pub fn noise(&self) -> NoiseSchedule {
        self.noise
    }

    pub fn diffusion(&self) -> DiffusionConfig {
        DiffusionConfig::new(self.kernel, self.noise)
    }

    pub fn time_features(&self, t: f64) -> Vec<f64> {
        time_features(&self.noise, t, self.params.arch.time_features)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ParamsFile {
            version: 1,
            format: FORMAT_TAG.to_string(),
            arch: self.params.arch.clone(),
            seed: self.params.seed,
            diffusion: self.diffusion(),
            layers: self
                .params
                .layers
                .iter()
                .map(|l| LayerFile {
                    rows: l.w.nrows(),
                    cols: l.w.ncols(),
                    w: l.w.iter().copied().collect(),
                    b: l.b.to_vec(),
                })
                .collect(),
        };
        io::to_json_string(&file)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ParamsFile = serde_json::from_str(text)?;
        if file.version != 1 || file.format != FORMAT_TAG {
            return Err(Error::config(format!("unsupported parameter file {} v{}", file.format, file.version)));
        }
        let layers = file
            .layers
            .into_iter()
            .map(|l| {
                let w = Array2::from_shape_vec((l.rows, l.cols), l.w)
                    .map_err(|e| Error::config(format!("bad weight array: {e}")))?;
                Ok(Dense { w, b: Array1::from(l.b) })
            })
            .collect::<Result<Vec<_>>>()?;
        let params = MlpParams { arch: file.arch, seed: file.seed, layers };
        let (kernel, noise) = file.diffusion.build()?;
        MlpScore::new(params, kernel, noise)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        MlpScore::from_json(&std::fs::read_to_string(path)?)
    }
}

impl MlpScore {
    fn ratios_from_output(&self, out: ndarray::ArrayView2<f64>, x: &[usize], positions: &[usize], t: f64) -> Result<Ratios> {
        let mut ratios = Vec::with_capacity(positions.len());
        for (row, &pos) in positions.iter().enumerate() {
            let mut r: Vec<f64> = out.row(row).iter().map(|z| z.exp()).collect();
            r[x[pos]] = 1.0;
            if let Some(y) = r.iter().position(|v| !v.is_finite() || *v <= 0.0) {
                return Err(Error::numerical(format!(
                    "network ratio {} at position {pos}, state {y}, t = {t}",
                    r[y]
                )));
            }
            ratios.push(r);
        }
        Ok(ratios)
    }
}

impl ScoreModel for MlpScore {
    fn kernel(&self) -> RateKernel {
        self.kernel
    }

    fn score_at(&self, x: &[usize], positions: &[usize], t: f64) -> Result<Ratios> {
        if positions.is_empty() {
            return Ok(Vec::new());
        }
        let input = self.params.row_inputs(x, positions, &self.time_features(t))?;
        let out = self.params.log_ratios(&input);
        self.ratios_from_output(out.view(), x, positions, t)
    }

    fn score_many(&self, xs: &[&[usize]], positions: &[Vec<usize>], t: f64) -> Result<Vec<Ratios>> {
        let feats = self.time_features(t);
        let total: usize = positions.iter().map(|p| p.len()).sum();
        let arch = &self.params.arch;
        let mut tokens = Array2::zeros((total, arch.window()));
        let mut row = 0;
        for (x, p) in xs.iter().zip(positions) {
            let one = self.params.row_inputs(x, p, &feats)?;
            tokens.slice_mut(s![row..row + p.len(), ..]).assign(&one.tokens);
            row += p.len();
        }
        let time = Array2::from_shape_fn((total, arch.time_features), |(_, f)| feats[f]);
        let out = self.params.log_ratios(&RowInputs { tokens, time });
        let mut start = 0;
        xs.iter()
            .zip(positions)
            .map(|(x, p)| {
                let r = self.ratios_from_output(out.slice(s![start..start + p.len(), ..]), x, p, t);
                start += p.len();
                r
            })
            .collect()
    }
}

/// Random parameter perturbation helper for tests and diagnostics.
pub fn perturb(params: &MlpParams, scale: f64, rng: &mut Rng) -> MlpParams {
    let mut p = params.clone();
    for l in &mut p.layers {
        l.w.mapv_inplace(|v| v + scale * rng.random_range(-1.0..1.0));
        l.b.mapv_inplace(|v| v + scale * rng.random_range(-1.0..1.0));
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_arch() -> MlpArch {
        MlpArch::new(5, 1, 4, vec![8, 6]).unwrap()
    }

    #[test]
    fn zero_params_give_unit_ratios() {
        let k = RateKernel::absorbing(4).unwrap();
        let score = MlpScore::new(MlpParams::zeros(small_arch()), k, NoiseSchedule::toy_default()).unwrap();
        let s = score.score(&[0, 4, 2], 0.5).unwrap();
        assert!(s.iter().flatten().all(|&v| v == 1.0));
    }

    #[test]
    fn scoring_is_deterministic() {
        let k = RateKernel::absorbing(4).unwrap();
        let score = MlpScore::new(MlpParams::init(small_arch(), 3), k, NoiseSchedule::toy_default()).unwrap();
        let a = score.score(&[0, 4, 2, 4], 0.37).unwrap();
        let b = score.score(&[0, 4, 2, 4], 0.37).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().flatten().all(|&v| v > 0.0 && v.is_finite()));
        assert_eq!(a[1][4], 1.0);
    }

    #[test]
    fn batched_scoring_matches_single() {
        let k = RateKernel::absorbing(4).unwrap();
        let score = MlpScore::new(MlpParams::init(small_arch(), 4), k, NoiseSchedule::toy_default()).unwrap();
        let xs: Vec<Vec<usize>> = vec![vec![4, 1, 4], vec![0, 0, 0], vec![4, 4, 2, 4]];
        let refs: Vec<&[usize]> = xs.iter().map(|v| v.as_slice()).collect();
        let pos: Vec<Vec<usize>> = xs.iter().map(|x| crate::score::active_positions(k, x)).collect();
        let many = score.score_many(&refs, &pos, 0.3).unwrap();
        for ((x, p), m) in xs.iter().zip(&pos).zip(&many) {
            assert_eq!(&score.score_at(x, p, 0.3).unwrap(), m);
        }
    }

    #[test]
    fn shape_mismatch_is_a_config_error() {
        let k = RateKernel::uniform(6).unwrap();
        let err = MlpScore::new(MlpParams::zeros(small_arch()), k, NoiseSchedule::toy_default()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let mut p = MlpParams::zeros(small_arch());
        p.layers[1].b = Array1::zeros(3);
        let k = RateKernel::absorbing(4).unwrap();
        assert!(MlpScore::new(p, k, NoiseSchedule::toy_default()).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let k = RateKernel::absorbing(4).unwrap();
        let score = MlpScore::new(MlpParams::init(small_arch(), 11), k, NoiseSchedule::toy_default()).unwrap();
        let text = score.to_json().unwrap();
        let back = MlpScore::from_json(&text).unwrap();
        assert_eq!(back.params(), score.params());
        assert_eq!(back.to_json().unwrap(), text);
        assert_eq!(back.diffusion(), score.diffusion());
    }

    #[test]
    fn window_padding() {
        let p = MlpParams::zeros(small_arch());
        let rows = p.row_inputs(&[1, 2, 3], &[0, 2], &[0.0; 4]).unwrap();
        assert_eq!(rows.tokens.row(0).to_vec(), vec![5, 1, 2]);
        assert_eq!(rows.tokens.row(1).to_vec(), vec![2, 3, 5]);
    }

    #[test]
    fn time_features_are_bounded() {
        let n = NoiseSchedule::toy_default();
        for t in [0.0, 1e-5, 0.3, 1.0] {
            let f = time_features(&n, t, 8);
            assert_eq!(f.len(), 8);
            assert!(f.iter().all(|v| v.abs() <= 1.0));
        }
    }
}
