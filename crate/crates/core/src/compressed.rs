//! Format-independent handle on a compressed matrix.

use std::fmt;
use std::str::FromStr;

use crate::error::invalid;
use crate::hbs::{hbs_compress, hbs_to_hbsid, HbsIdMatrix, HbsMatrix};
use crate::hodlr::{hodlr_compress, HodlrMatrix};
use crate::linalg::DenseMatrix;
use crate::operator::LinearOracle;
use crate::tree::IndexTree;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Hodlr,
    Hbs,
    HbsId,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Hodlr, Format::Hbs, Format::HbsId];

    pub fn name(self) -> &'static str {
        match self {
            Format::Hodlr => "hodlr",
            Format::Hbs => "hbs",
            Format::HbsId => "hbsid",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Format::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid(format!("unknown format '{s}' (expected hodlr, hbs or hbsid)")))
    }
}

/// Knobs shared by the compressors. HODLR truncates its sibling blocks at
/// `eps`; HBS samples at the fixed rank `sample_width`; HBS-ID compresses as
/// HBS and then re-skeletonizes at relative tolerance `eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressParams {
    pub sample_width: usize,
    pub eps: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Compressed {
    Hodlr(HodlrMatrix),
    Hbs(HbsMatrix),
    HbsId(HbsIdMatrix),
}

/// Compresses `oracle` on `tree` into the requested format.
pub fn compress(
    oracle: &(impl LinearOracle + ?Sized),
    tree: &IndexTree,
    format: Format,
    params: CompressParams,
) -> Result<Compressed> {
    if !(params.eps > 0.0 && params.eps < 1.0) {
        return Err(invalid(format!("tolerance {} outside (0, 1)", params.eps)));
    }
    Ok(match format {
        Format::Hodlr => Compressed::Hodlr(hodlr_compress(oracle, tree, params.sample_width, params.eps, params.seed)?),
        Format::Hbs => Compressed::Hbs(hbs_compress(oracle, tree, params.sample_width, params.seed, false)?),
        Format::HbsId => {
            let h = hbs_compress(oracle, tree, params.sample_width, params.seed, false)?;
            Compressed::HbsId(hbs_to_hbsid(&h, params.eps)?)
        }
    })
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            Compressed::Hodlr($m) => $e,
            Compressed::Hbs($m) => $e,
            Compressed::HbsId($m) => $e,
        }
    };
}

impl Compressed {
    pub fn format(&self) -> Format {
        match self {
            Compressed::Hodlr(_) => Format::Hodlr,
            Compressed::Hbs(_) => Format::Hbs,
            Compressed::HbsId(_) => Format::HbsId,
        }
    }

    pub fn tree(&self) -> &IndexTree {
        dispatch!(self, m => m.tree())
    }

    pub fn dim(&self) -> usize {
        self.tree().size()
    }

    pub fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        dispatch!(self, m => m.apply(x))
    }

    pub fn apply_adjoint(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        dispatch!(self, m => m.apply_adjoint(x))
    }

    pub fn apply_truncated(&self, level: usize, x: &DenseMatrix, adjoint: bool) -> Result<DenseMatrix> {
        dispatch!(self, m => m.apply_truncated(level, x, adjoint))
    }

    pub fn storage_bytes(&self) -> usize {
        dispatch!(self, m => m.storage_bytes())
    }

    pub fn max_rank(&self) -> usize {
        dispatch!(self, m => m.max_rank())
    }
}

impl From<HodlrMatrix> for Compressed {
    fn from(m: HodlrMatrix) -> Self {
        Compressed::Hodlr(m)
    }
}

impl From<HbsMatrix> for Compressed {
    fn from(m: HbsMatrix) -> Self {
        Compressed::Hbs(m)
    }
}

impl From<HbsIdMatrix> for Compressed {
    fn from(m: HbsIdMatrix) -> Self {
        Compressed::HbsId(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_names_round_trip() {
        for f in Format::ALL {
            assert_eq!(f.name().parse::<Format>().unwrap(), f);
        }
        assert_eq!("HBSID".parse::<Format>().unwrap(), Format::HbsId);
        assert!("hss".parse::<Format>().is_err());
    }
}
