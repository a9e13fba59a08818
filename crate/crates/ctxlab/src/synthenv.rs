//! Synthetic Gaussian environments. Each input is a concatenation of three
//! blocks: irrelevant features (class-independent), causal features driven
//! by the label class `z_c` (optionally corrupted by additive noise), and
//! spurious features driven by a context class `z_s` that co-occurs with
//! `z_c` with probability `p_co`.
//!
//! Note on `p_co = 0`: for binary classes the coupling mechanism gives
//! perfect anti-correlation (`z_s = 1 - z_c`) rather than independence.

use std::ops::Range;
use std::path::Path;

use rand::Rng;

use crate::error::{CtxError, Result};
use crate::numerics::random::{normal, rng_from_seed, CtxRng};
use crate::numerics::Matrix;
use crate::scalar::{cast, to_f64, Scalar};
use crate::textio;

/// Generative parameters of one environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSpec {
    /// Probability that the spurious class equals the causal class.
    pub p_co: f64,
    /// Std of the additive noise applied to the causal block.
    pub sigma_eps: f64,
    pub mu_c0: f64,
    pub mu_c1: f64,
    pub mu_s0: f64,
    pub mu_s1: f64,
    pub sigma_c: f64,
    pub sigma_s: f64,
    pub mu_n: f64,
    pub sigma_n: f64,
    pub dim_irrelevant: usize,
    pub dim_causal: usize,
    pub dim_spurious: usize,
    pub n_samples: usize,
    pub seed: u64,
}

impl EnvironmentSpec {
    pub fn new(p_co: f64, sigma_eps: f64, n_samples: usize, seed: u64) -> Self {
        EnvironmentSpec {
            p_co,
            sigma_eps,
            mu_c0: 0.2,
            mu_c1: 0.8,
            mu_s0: 0.2,
            mu_s1: 0.8,
            sigma_c: 0.2,
            sigma_s: 0.2,
            mu_n: 0.5,
            sigma_n: 0.2,
            dim_irrelevant: 80,
            dim_causal: 10,
            dim_spurious: 10,
            n_samples,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_co) {
            return Err(CtxError::InvalidSpec(format!("p_co {} not in [0,1]", self.p_co)));
        }
        if self.sigma_eps < 0.0 {
            return Err(CtxError::InvalidSpec("sigma_eps must be nonnegative".into()));
        }
        for (name, v) in [
            ("sigma_c", self.sigma_c),
            ("sigma_s", self.sigma_s),
            ("sigma_n", self.sigma_n),
        ] {
            if v <= 0.0 {
                return Err(CtxError::InvalidSpec(format!("{name} must be positive, got {v}")));
            }
        }
        if self.dim_irrelevant == 0 || self.dim_causal == 0 || self.dim_spurious == 0 {
            return Err(CtxError::InvalidSpec("all block dimensions must be positive".into()));
        }
        if self.n_samples == 0 {
            return Err(CtxError::InvalidSpec("n_samples must be positive".into()));
        }
        Ok(())
    }

    pub fn total_dim(&self) -> usize {
        self.dim_irrelevant + self.dim_causal + self.dim_spurious
    }

    pub fn layout(&self) -> BlockLayout {
        let di = self.dim_irrelevant;
        let dc = self.dim_causal;
        let ds = self.dim_spurious;
        BlockLayout {
            irrelevant: 0..di,
            causal: di..di + dc,
            spurious: di + dc..di + dc + ds,
        }
    }

    pub fn mu_c(&self, z: usize) -> f64 {
        if z == 0 {
            self.mu_c0
        } else {
            self.mu_c1
        }
    }

    pub fn mu_s(&self, z: usize) -> f64 {
        if z == 0 {
            self.mu_s0
        } else {
            self.mu_s1
        }
    }

    /// Causal block draw for class `z`: N(mu_c[z], sigma_c^2) plus additive
    /// N(0, sigma_eps^2) noise per dimension.
    pub fn fill_causal<S: Scalar, R: Rng>(&self, z: usize, rng: &mut R, out: &mut [S]) {
        let mu = self.mu_c(z);
        for v in out.iter_mut() {
            let clean = normal(rng, mu, self.sigma_c);
            let noise = if self.sigma_eps > 0.0 {
                normal(rng, 0.0, self.sigma_eps)
            } else {
                0.0
            };
            *v = cast(clean + noise);
        }
    }

    pub fn fill_spurious<S: Scalar, R: Rng>(&self, z: usize, rng: &mut R, out: &mut [S]) {
        let mu = self.mu_s(z);
        for v in out.iter_mut() {
            *v = cast(normal(rng, mu, self.sigma_s));
        }
    }

    pub fn fill_irrelevant<S: Scalar, R: Rng>(&self, rng: &mut R, out: &mut [S]) {
        for v in out.iter_mut() {
            *v = cast(normal(rng, self.mu_n, self.sigma_n));
        }
    }

    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        textio::write_kv(
            path,
            &[
                ("p_co", textio::fmt_float(self.p_co)),
                ("sigma_eps", textio::fmt_float(self.sigma_eps)),
                ("mu_c0", textio::fmt_float(self.mu_c0)),
                ("mu_c1", textio::fmt_float(self.mu_c1)),
                ("mu_s0", textio::fmt_float(self.mu_s0)),
                ("mu_s1", textio::fmt_float(self.mu_s1)),
                ("sigma_c", textio::fmt_float(self.sigma_c)),
                ("sigma_s", textio::fmt_float(self.sigma_s)),
                ("mu_n", textio::fmt_float(self.mu_n)),
                ("sigma_n", textio::fmt_float(self.sigma_n)),
                ("dim_irrelevant", self.dim_irrelevant.to_string()),
                ("dim_causal", self.dim_causal.to_string()),
                ("dim_spurious", self.dim_spurious.to_string()),
                ("n_samples", self.n_samples.to_string()),
                ("seed", self.seed.to_string()),
            ],
        )
    }

    pub fn read_sidecar(path: &Path) -> Result<Self> {
        let map = textio::read_kv(path)?;
        let get = |key: &str| -> Result<&String> {
            map.get(key)
                .ok_or_else(|| CtxError::Parse(format!("sidecar missing key {key}")))
        };
        let spec = EnvironmentSpec {
            p_co: textio::parse_float(get("p_co")?)?,
            sigma_eps: textio::parse_float(get("sigma_eps")?)?,
            mu_c0: textio::parse_float(get("mu_c0")?)?,
            mu_c1: textio::parse_float(get("mu_c1")?)?,
            mu_s0: textio::parse_float(get("mu_s0")?)?,
            mu_s1: textio::parse_float(get("mu_s1")?)?,
            sigma_c: textio::parse_float(get("sigma_c")?)?,
            sigma_s: textio::parse_float(get("sigma_s")?)?,
            mu_n: textio::parse_float(get("mu_n")?)?,
            sigma_n: textio::parse_float(get("sigma_n")?)?,
            dim_irrelevant: textio::parse_usize(get("dim_irrelevant")?)?,
            dim_causal: textio::parse_usize(get("dim_causal")?)?,
            dim_spurious: textio::parse_usize(get("dim_spurious")?)?,
            n_samples: textio::parse_usize(get("n_samples")?)?,
            seed: textio::parse_u64(get("seed")?)?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Index ranges of the three feature blocks; they partition `[0, total)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLayout {
    pub irrelevant: Range<usize>,
    pub causal: Range<usize>,
    pub spurious: Range<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Causal,
    Spurious,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<S: Scalar> {
    pub x: Vec<S>,
    /// Task label. Equal to `z_c` in generated environments; block-only
    /// probing datasets relabel this to the 2n-way probe label.
    pub y: usize,
    pub z_c: usize,
    pub z_s: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<S: Scalar> {
    pub samples: Vec<Sample<S>>,
    pub spec: EnvironmentSpec,
    pub layout: BlockLayout,
}

impl<S: Scalar> Dataset<S> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn to_matrix(&self) -> Matrix<S> {
        let dim = self.spec.total_dim();
        let mut m = Matrix::zeros(self.samples.len(), dim);
        for (r, s) in self.samples.iter().enumerate() {
            m.row_mut(r).copy_from_slice(&s.x);
        }
        m
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.y).collect()
    }

    pub fn spurious_labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.z_s).collect()
    }

    /// CSV with header `y,z_c,z_s,x_0,...,x_{D-1}`, one row per sample.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let dim = self.spec.total_dim();
        let mut out = String::from("y,z_c,z_s");
        for i in 0..dim {
            out.push_str(&format!(",x_{i}"));
        }
        out.push('\n');
        for s in &self.samples {
            out.push_str(&format!("{},{},{}", s.y, s.z_c, s.z_s));
            for &v in &s.x {
                out.push(',');
                out.push_str(&textio::fmt_float(to_f64(v)));
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn read_csv(path: &Path, spec: EnvironmentSpec) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let dim = spec.total_dim();
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| CtxError::Parse("empty dataset file".into()))?;
        if !header.starts_with("y,z_c,z_s") {
            return Err(CtxError::Parse(format!("unexpected dataset header {header:?}")));
        }
        let mut samples = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let y = textio::parse_usize(fields.next().unwrap_or(""))?;
            let z_c = textio::parse_usize(fields.next().unwrap_or(""))?;
            let z_s = textio::parse_usize(fields.next().unwrap_or(""))?;
            let x: Vec<S> = fields
                .map(|f| textio::parse_float(f).map(cast))
                .collect::<Result<_>>()?;
            if x.len() != dim {
                return Err(CtxError::Parse(format!(
                    "row has {} features, spec expects {dim}",
                    x.len()
                )));
            }
            samples.push(Sample { x, y, z_c, z_s });
        }
        let layout = spec.layout();
        Ok(Dataset {
            samples,
            spec,
            layout,
        })
    }
}

/// Sample a dataset from the generative process. Deterministic given the
/// spec (including its seed).
pub fn generate<S: Scalar>(spec: &EnvironmentSpec) -> Result<Dataset<S>> {
    spec.validate()?;
    let layout = spec.layout();
    let dim = spec.total_dim();
    let mut rng: CtxRng = rng_from_seed(spec.seed);
    let mut samples = Vec::with_capacity(spec.n_samples);
    for _ in 0..spec.n_samples {
        let z_c = usize::from(rng.random::<f64>() < 0.5);
        let z_s = if rng.random::<f64>() < spec.p_co {
            z_c
        } else {
            1 - z_c
        };
        let mut x = vec![S::zero(); dim];
        spec.fill_irrelevant(&mut rng, &mut x[layout.irrelevant.clone()]);
        spec.fill_causal(z_c, &mut rng, &mut x[layout.causal.clone()]);
        spec.fill_spurious(z_s, &mut rng, &mut x[layout.spurious.clone()]);
        samples.push(Sample { x, y: z_c, z_c, z_s });
    }
    Ok(Dataset {
        samples,
        spec: spec.clone(),
        layout,
    })
}

/// Background-Invariance test environment: contexts decoupled, clean
/// causal features.
pub fn make_ood1(base: &EnvironmentSpec) -> EnvironmentSpec {
    EnvironmentSpec {
        p_co: 0.0,
        sigma_eps: 0.0,
        ..base.clone()
    }
}

/// Object-Disambiguation test environment: contexts perfectly coupled,
/// heavy causal noise.
pub fn make_ood2(base: &EnvironmentSpec) -> EnvironmentSpec {
    EnvironmentSpec {
        p_co: 1.0,
        sigma_eps: 1.5,
        ..base.clone()
    }
}

/// Copy of `ds` with every block other than the selected one replaced by
/// the constant `mu_n`, relabeled for 2n-way probing: causal-only rows get
/// `z_c`, spurious-only rows get `n_classes + z_s`.
pub fn make_block_only<S: Scalar>(ds: &Dataset<S>, block: Block) -> Result<Dataset<S>> {
    if ds.is_empty() {
        return Err(CtxError::InvalidSpec("make_block_only on empty dataset".into()));
    }
    let fill = cast::<S>(ds.spec.mu_n);
    let layout = ds.layout.clone();
    let keep = match block {
        Block::Causal => layout.causal.clone(),
        Block::Spurious => layout.spurious.clone(),
    };
    let n_classes = 2;
    let samples = ds
        .samples
        .iter()
        .map(|s| {
            let mut x = vec![fill; s.x.len()];
            x[keep.clone()].copy_from_slice(&s.x[keep.clone()]);
            let y = match block {
                Block::Causal => s.z_c,
                Block::Spurious => n_classes + s.z_s,
            };
            Sample {
                x,
                y,
                z_c: s.z_c,
                z_s: s.z_s,
            }
        })
        .collect();
    Ok(Dataset {
        samples,
        spec: ds.spec.clone(),
        layout,
    })
}
