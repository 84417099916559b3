//! Error estimation, timing and CSV reporting for compression sweeps.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::compressed::{compress, CompressParams, Compressed, Format};
use crate::error::{check_dim, invalid};
use crate::linalg::GaussianRng;
use crate::operator::{
    compressed_oracle, dense_oracle, double_layer_oracle, log_kernel_oracle, planted, product_oracle,
    schur_frontal_oracle, CountingOracle, LinearOracle, PointSet2D, StarCurve,
};
use crate::tree::IndexTree;
use crate::{Error, Result};

/// `max_i |A w_i - B w_i| / |A w_i|` over `trials` random unit vectors.
/// Probes on which the reference vanishes are skipped.
pub fn estimate_error(
    reference: &(impl LinearOracle + ?Sized),
    compressed: &(impl LinearOracle + ?Sized),
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let n = reference.dim();
    check_dim(n, compressed.dim())?;
    if trials == 0 {
        return Err(invalid("need at least one probe"));
    }
    let mut w = GaussianRng::new(seed).block(n, trials);
    for mut c in w.column_iter_mut() {
        let norm = c.norm();
        if norm > 0.0 {
            c /= norm;
        }
    }
    let a = reference.apply(&w)?;
    let b = compressed.apply(&w)?;
    let mut worst: Option<f64> = None;
    for j in 0..trials {
        let denom = a.column(j).norm();
        if denom == 0.0 {
            continue;
        }
        let e = (a.column(j) - b.column(j)).norm() / denom;
        worst = Some(worst.map_or(e, |w: f64| w.max(e)));
    }
    worst.ok_or_else(|| invalid("reference operator vanished on every probe"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    PlantedHodlr,
    PlantedHbs,
    Logcurve,
    BieDoublelayer,
    Frontal,
    Product,
}

impl Kernel {
    pub const ALL: [Kernel; 6] = [
        Kernel::PlantedHodlr,
        Kernel::PlantedHbs,
        Kernel::Logcurve,
        Kernel::BieDoublelayer,
        Kernel::Frontal,
        Kernel::Product,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kernel::PlantedHodlr => "planted-hodlr",
            Kernel::PlantedHbs => "planted-hbs",
            Kernel::Logcurve => "logcurve",
            Kernel::BieDoublelayer => "bie-doublelayer",
            Kernel::Frontal => "frontal",
            Kernel::Product => "product",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Kernel::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid(format!("unknown kernel '{s}'")))
    }
}

impl Serialize for Format {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Format {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn default_rank() -> usize {
    5
}

fn default_grid_width() -> usize {
    41
}

fn default_trials() -> usize {
    10
}

/// Sweep description, usually read from a TOML file:
///
/// ```toml
/// kernel = "logcurve"
/// format = "hbsid"
/// sizes = [400, 800, 1600]
/// leaf_size = 50
/// sample_width = 45
/// eps = 1e-9
/// seed = 7
/// output = "logcurve.csv"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub kernel: Kernel,
    pub format: Format,
    pub sizes: Vec<usize>,
    pub leaf_size: usize,
    pub sample_width: usize,
    pub eps: f64,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Off-diagonal rank of the planted kernels.
    #[serde(default = "default_rank")]
    pub planted_rank: usize,
    #[serde(default = "default_grid_width")]
    pub grid_width: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

impl BenchConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(invalid("sizes must list at least one N"));
        }
        if self.leaf_size == 0 || self.sample_width == 0 || self.trials == 0 {
            return Err(invalid("leaf_size, sample_width and trials must be positive"));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(invalid(format!("eps {} outside (0, 1)", self.eps)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionReport {
    pub n: usize,
    pub n_matvec_apply: u64,
    pub n_matvec_adjoint: u64,
    pub t_compress_seconds: f64,
    pub t_net_seconds: f64,
    pub t_apply_seconds: f64,
    pub storage_bytes: usize,
    pub storage_per_dof: f64,
    pub error_e: f64,
    pub max_rank_k: usize,
    pub format: Format,
    pub seed: u64,
    pub eps: f64,
    pub sample_width: usize,
}

/// Reference operator for one row of a sweep.
pub fn build_operator(cfg: &BenchConfig, n: usize) -> Result<Box<dyn LinearOracle>> {
    let seed = cfg.seed;
    Ok(match cfg.kernel {
        Kernel::PlantedHodlr => Box::new(dense_oracle(planted::planted_hodlr(n, cfg.leaf_size, cfg.planted_rank, seed)?)?),
        Kernel::PlantedHbs => Box::new(dense_oracle(planted::planted_hbs(n, cfg.leaf_size, cfg.planted_rank, seed)?)?),
        Kernel::Logcurve => Box::new(log_kernel_oracle(&PointSet2D::on_curve(&StarCurve::three_lobed(), n)?)?),
        Kernel::BieDoublelayer => Box::new(double_layer_oracle(&StarCurve::three_lobed(), n)?),
        Kernel::Frontal => Box::new(schur_frontal_oracle(cfg.grid_width, n, seed)?),
        Kernel::Product => {
            let (left, right) = product_factors(n)?;
            Box::new(product_oracle(left, right)?)
        }
    })
}

/// The two smooth-kernel factors of the product experiment.
pub fn product_factors(n: usize) -> Result<(Box<dyn LinearOracle>, Box<dyn LinearOracle>)> {
    let curve = StarCurve::three_lobed();
    Ok((
        Box::new(log_kernel_oracle(&PointSet2D::on_curve(&curve, n)?)?),
        Box::new(double_layer_oracle(&curve, n)?),
    ))
}

/// Compresses each factor to `format`, then exposes their product through
/// the compressed fast applies.
pub fn compressed_product(
    n: usize,
    tree: &IndexTree,
    format: Format,
    params: CompressParams,
) -> Result<impl LinearOracle> {
    let (left, right) = product_factors(n)?;
    let cl = compress(&left, tree, format, params)?;
    let cr = compress(&right, tree, format, CompressParams { seed: params.seed.wrapping_add(1), ..params })?;
    product_oracle(compressed_oracle(cl), compressed_oracle(cr))
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

/// Compresses `sampled` once and measures the result against `reference`.
pub fn measure(
    sampled: &(impl LinearOracle + ?Sized),
    reference: &(impl LinearOracle + ?Sized),
    tree: &IndexTree,
    format: Format,
    params: CompressParams,
    trials: usize,
) -> Result<(Compressed, CompressionReport)> {
    let n = tree.size();
    let counted = CountingOracle::new(sampled);
    let start = Instant::now();
    let c = compress(&counted, tree, format, params)?;
    let t_compress = start.elapsed();
    let t_net = t_compress.saturating_sub(counted.oracle_time());

    let x = GaussianRng::new(params.seed ^ 0x5eed).block(n, 1);
    let mut times = Vec::with_capacity(3);
    for _ in 0..3 {
        let t = Instant::now();
        std::hint::black_box(c.apply(&x)?);
        times.push(t.elapsed());
    }

    let error_e = estimate_error(reference, &compressed_oracle(c.clone()), trials, params.seed.wrapping_add(0xe))?;
    let storage = c.storage_bytes();
    let report = CompressionReport {
        n,
        n_matvec_apply: counted.matvec_count(),
        n_matvec_adjoint: counted.adjoint_count(),
        t_compress_seconds: t_compress.as_secs_f64(),
        t_net_seconds: t_net.as_secs_f64(),
        t_apply_seconds: median(times).as_secs_f64(),
        storage_bytes: storage,
        storage_per_dof: storage as f64 / (8.0 * n as f64),
        error_e,
        max_rank_k: c.max_rank(),
        format,
        seed: params.seed,
        eps: params.eps,
        sample_width: params.sample_width,
    };
    Ok((c, report))
}

/// One report per configured size, in the order given.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<Vec<CompressionReport>> {
    cfg.validate()?;
    let params = CompressParams {
        sample_width: cfg.sample_width,
        eps: cfg.eps,
        seed: cfg.seed,
    };
    let mut out = Vec::with_capacity(cfg.sizes.len());
    for &n in &cfg.sizes {
        let tree = IndexTree::build(n, cfg.leaf_size)?;
        let reference = build_operator(cfg, n)?;
        let (_, report) = if cfg.kernel == Kernel::Product {
            let factors = compressed_product(n, &tree, cfg.format, params)?;
            measure(&factors, &reference, &tree, cfg.format, params, cfg.trials)?
        } else {
            measure(&reference, &reference, &tree, cfg.format, params, cfg.trials)?
        };
        out.push(report);
    }
    Ok(out)
}

pub fn write_csv<W: std::io::Write>(reports: &[CompressionReport], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in reports {
        wtr.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<CompressionReport>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(|e| Error::Format(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{IdentityOracle, ZeroOracle};

    fn planted_config(sizes: Vec<usize>) -> BenchConfig {
        BenchConfig::parse(&format!(
            "kernel = \"planted-hodlr\"\nformat = \"hodlr\"\nsizes = {sizes:?}\nleaf_size = 32\nsample_width = 15\neps = 1e-9\nseed = 3\n"
        ))
        .unwrap()
    }

    #[test]
    fn estimator_extremes() {
        let a = dense_oracle(GaussianRng::new(1).block(30, 30)).unwrap();
        assert!(estimate_error(&a, &a, 10, 2).unwrap() <= 1e-15);
        assert_eq!(estimate_error(&IdentityOracle(12), &ZeroOracle(12), 10, 2).unwrap(), 1.0);
        assert!(estimate_error(&ZeroOracle(12), &IdentityOracle(12), 10, 2).is_err());
        assert!(estimate_error(&IdentityOracle(12), &IdentityOracle(13), 10, 2).is_err());
    }

    #[test]
    fn planted_hodlr_meets_tolerance() {
        let a = planted::planted_hodlr(256, 32, 5, 4).unwrap();
        let tree = IndexTree::build(256, 32).unwrap();
        let op = dense_oracle(a).unwrap();
        let p = CompressParams {
            sample_width: 15,
            eps: 1e-9,
            seed: 8,
        };
        let (_, r) = measure(&op, &op, &tree, Format::Hodlr, p, 10).unwrap();
        assert!(r.error_e <= 1e-8, "E = {}", r.error_e);
        assert_eq!(r.max_rank_k, 5);
        assert_eq!(r.n_matvec_apply, 3 * 30 + 32);
        assert_eq!(r.n_matvec_adjoint, 3 * 30);
        assert!(r.t_net_seconds <= r.t_compress_seconds);
        assert_eq!(r.storage_per_dof, r.storage_bytes as f64 / (8.0 * 256.0));
    }

    #[test]
    fn sweep_reports_every_size_deterministically() {
        let cfg = planted_config(vec![256, 512]);
        let a = run_benchmark(&cfg).unwrap();
        let b = run_benchmark(&cfg).unwrap();
        assert_eq!(a.iter().map(|r| r.n).collect::<Vec<_>>(), vec![256, 512]);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.error_e.to_bits(), y.error_e.to_bits());
            assert_eq!(x.max_rank_k, y.max_rank_k);
            assert_eq!(x.storage_bytes, y.storage_bytes);
        }
    }

    #[test]
    fn csv_round_trip() {
        let reports = run_benchmark(&planted_config(vec![128])).unwrap();
        let mut buf = Vec::new();
        write_csv(&reports, &mut buf).unwrap();
        let header = String::from_utf8(buf.clone()).unwrap();
        assert!(header.starts_with("n,n_matvec_apply,n_matvec_adjoint,t_compress_seconds,"));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), reports);
    }

    #[test]
    fn config_validation() {
        assert!(BenchConfig::parse("kernel = \"nope\"").is_err());
        let ok = "kernel = \"frontal\"\nformat = \"hbsid\"\nsizes = [100]\nleaf_size = 25\nsample_width = 20\neps = 1e-9\nseed = 0\n";
        let cfg = BenchConfig::parse(ok).unwrap();
        assert_eq!(cfg.grid_width, 41);
        assert_eq!(cfg.trials, 10);
        assert!(BenchConfig::parse(&ok.replace("1e-9", "0.0")).is_err());
        assert!(BenchConfig::parse(&ok.replace("[100]", "[]")).is_err());
        assert!(BenchConfig::parse(&format!("{ok}colour = 1\n")).is_err());
        for k in Kernel::ALL {
            assert_eq!(k.name().parse::<Kernel>().unwrap(), k);
        }
    }
}
