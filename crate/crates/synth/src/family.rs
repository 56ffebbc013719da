use std::f64::consts::PI;
use std::path::Path;

use pcgen_core::{CoreError, LabeledPointCloud, PartVocabulary, PointCloudSet};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Result, SynthError};
use crate::item_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// A stick hanging below a joint with a ball resting on top of it.
    StickBall,
    /// An elongated body with a pair of wings and a tail.
    WingedBody,
}

impl Family {
    pub fn part_names(self) -> &'static [&'static str] {
        match self {
            Family::StickBall => &["stick", "ball"],
            Family::WingedBody => &["body", "wings", "tail"],
        }
    }

    pub fn default_styles(self) -> Vec<StyleRange> {
        let r = |name: &str, min, max| StyleRange { name: name.into(), min, max };
        match self {
            Family::StickBall => vec![r("stick_length", 0.4, 1.0), r("ball_radius", 0.15, 0.4)],
            Family::WingedBody => vec![r("body_length", 0.6, 1.2), r("wing_span", 0.3, 0.8), r("tail_size", 0.1, 0.3)],
        }
    }

    pub fn vocab(self) -> PartVocabulary {
        PartVocabulary::new(self.part_names().iter().map(|s| s.to_string()).collect())
            .expect("family vocabularies are valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

/// Generator settings for one shape family.
///
/// Style parameters are drawn from a Gaussian copula: latent
/// `u_k = sqrt(rho) s + sqrt(1 - rho) e_k` with shared `s`, mapped through the
/// normal CDF onto `[min, max]`. Distinct parts therefore share style.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeFamilyConfig {
    pub family: Family,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub points_per_part: Vec<usize>,
    /// Empty means the family defaults.
    #[serde(default)]
    pub styles: Vec<StyleRange>,
    #[serde(default = "default_correlation")]
    pub correlation: f64,
    /// Standard deviation of per-coordinate point noise.
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    /// Half-width of the uniform per-cloud anchor offset.
    #[serde(default = "default_offset")]
    pub offset_range: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_dim() -> usize {
    2
}
fn default_correlation() -> f64 {
    0.9
}
fn default_jitter() -> f64 {
    0.01
}
fn default_offset() -> f64 {
    0.05
}

impl ShapeFamilyConfig {
    pub fn new(family: Family, dim: usize, points_per_part: Vec<usize>, seed: u64) -> Self {
        Self {
            family,
            dim,
            points_per_part,
            styles: Vec::new(),
            correlation: default_correlation(),
            jitter: default_jitter(),
            offset_range: default_offset(),
            seed,
        }
    }

    pub fn stick_ball(points: usize, seed: u64) -> Self {
        Self::new(Family::StickBall, 2, vec![points / 2, points - points / 2], seed)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|source| SynthError::Json { path: path.display().to_string(), source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolved_styles(&self) -> Vec<StyleRange> {
        if self.styles.is_empty() {
            self.family.default_styles()
        } else {
            self.styles.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SynthError::BadConfig(m));
        if self.dim != 2 && self.dim != 3 {
            return bad(format!("dim must be 2 or 3, got {}", self.dim));
        }
        let parts = self.family.part_names().len();
        if self.points_per_part.len() != parts {
            return bad(format!("{} point counts given for {parts} parts", self.points_per_part.len()));
        }
        if self.points_per_part.contains(&0) {
            return bad("every part needs at least one point".into());
        }
        let expected = self.family.default_styles();
        let styles = self.resolved_styles();
        if styles.len() != expected.len() {
            return bad(format!("family needs {} style ranges, got {}", expected.len(), styles.len()));
        }
        for s in &styles {
            if !(s.min.is_finite() && s.max.is_finite() && s.min < s.max && s.min > 0.0) {
                return bad(format!("style {:?} needs 0 < min < max, got [{}, {}]", s.name, s.min, s.max));
            }
        }
        if !(0.0..=1.0).contains(&self.correlation) {
            return bad(format!("correlation must be in [0, 1], got {}", self.correlation));
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return bad(format!("jitter must be non-negative, got {}", self.jitter));
        }
        if !(self.offset_range.is_finite() && self.offset_range >= 0.0) {
            return bad(format!("offset_range must be non-negative, got {}", self.offset_range));
        }
        Ok(())
    }
}

fn draw_styles(cfg: &ShapeFamilyConfig, styles: &[StyleRange], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let phi = Normal::standard();
    let shared: f64 = rng.sample(StandardNormal);
    let (a, b) = (cfg.correlation.sqrt(), (1.0 - cfg.correlation).sqrt());
    styles
        .iter()
        .map(|s| {
            let e: f64 = rng.sample(StandardNormal);
            let u = phi.cdf(a * shared + b * e);
            s.min + u * (s.max - s.min)
        })
        .collect()
}

/// The style parameters `synth_set` uses for each cloud, in order.
pub fn sample_styles(cfg: &ShapeFamilyConfig, count: usize) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let styles = cfg.resolved_styles();
    Ok((0..count)
        .map(|i| draw_styles(cfg, &styles, &mut item_rng(cfg.seed, i as u64)))
        .collect())
}

pub fn synth_set(cfg: &ShapeFamilyConfig, count: usize) -> Result<PointCloudSet> {
    cfg.validate()?;
    if count == 0 {
        return Err(SynthError::EmptySet);
    }
    let styles = cfg.resolved_styles();
    let vocab = cfg.family.vocab();
    let clouds = (0..count)
        .map(|i| {
            let mut rng = item_rng(cfg.seed, i as u64);
            let style = draw_styles(cfg, &styles, &mut rng);
            build_cloud(cfg, &style, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let name = format!("{}-s{}", serde_json::to_value(cfg.family).unwrap().as_str().unwrap(), cfg.seed);
    Ok(PointCloudSet::new(name, vocab, clouds)?)
}

struct Builder<'a> {
    dim: usize,
    jitter: f64,
    rng: &'a mut ChaCha8Rng,
    points: Vec<f64>,
    labels: Vec<u16>,
}

impl Builder<'_> {
    fn push(&mut self, label: u16, p: [f64; 3]) {
        for &v in &p[..self.dim] {
            let noise: f64 = self.rng.sample(StandardNormal);
            self.points.push(v + self.jitter * noise);
        }
        self.labels.push(label);
    }

    fn unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform direction on the circle (d=2) or sphere (d=3).
    fn direction(&mut self) -> [f64; 3] {
        if self.dim == 2 {
            let a = 2.0 * PI * self.unit();
            return [a.cos(), a.sin(), 0.0];
        }
        loop {
            let v: [f64; 3] = [self.rng.sample(StandardNormal), self.rng.sample(StandardNormal), self.rng.sample(StandardNormal)];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n > 1e-12 {
                return [v[0] / n, v[1] / n, v[2] / n];
            }
        }
    }
}

fn build_cloud(cfg: &ShapeFamilyConfig, style: &[f64], rng: &mut ChaCha8Rng) -> Result<LabeledPointCloud> {
    let mut anchor = [0.0; 3];
    for v in anchor.iter_mut().take(cfg.dim) {
        *v = cfg.offset_range * (2.0 * rng.random::<f64>() - 1.0);
    }
    let total = cfg.points_per_part.iter().sum::<usize>();
    let mut b = Builder {
        dim: cfg.dim,
        jitter: cfg.jitter,
        rng,
        points: Vec::with_capacity(total * cfg.dim),
        labels: Vec::with_capacity(total),
    };
    let [x, y, z] = anchor;
    match cfg.family {
        Family::StickBall => {
            let (len, radius) = (style[0], style[1]);
            for _ in 0..cfg.points_per_part[0] {
                let t = b.unit();
                b.push(0, [x, y - t * len, z]);
            }
            for _ in 0..cfg.points_per_part[1] {
                let u = b.direction();
                b.push(1, [x + radius * u[0], y + radius + radius * u[1], z + radius * u[2]]);
            }
        }
        Family::WingedBody => {
            let (body, span, tail) = (style[0], style[1], style[2]);
            let (half_len, half_w) = (body / 2.0, body / 10.0);
            for _ in 0..cfg.points_per_part[0] {
                let u = b.direction();
                b.push(0, [x + half_len * u[0], y + half_w * u[1], z + half_w * u[2]]);
            }
            for _ in 0..cfg.points_per_part[1] {
                let (chord, reach) = (b.unit(), b.unit());
                let side = if b.unit() < 0.5 { -1.0 } else { 1.0 };
                b.push(1, [x + 0.1 * body * (2.0 * chord - 1.0), y + side * (half_w + reach * span), z]);
            }
            for _ in 0..cfg.points_per_part[2] {
                let (chord, reach) = (b.unit(), b.unit());
                let rear = x - half_len + 0.05 * body * chord;
                if cfg.dim == 2 {
                    b.push(2, [rear, y + tail * (2.0 * reach - 1.0), z]);
                } else {
                    b.push(2, [rear, y, z + half_w + tail * reach]);
                }
            }
        }
    }
    let parts = cfg.points_per_part.len();
    Ok(LabeledPointCloud::new(b.points, cfg.dim, b.labels, parts)?)
}
