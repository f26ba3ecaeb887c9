use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// The four subbands of one decomposition step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subband {
    /// Multi-scale (all-ones) component.
    Ms,
    /// Vertical detail.
    Vd,
    /// Horizontal detail.
    Hd,
    /// Diagonal detail.
    Dd,
}

impl Subband {
    pub const ALL: [Subband; 4] = [Subband::Ms, Subband::Vd, Subband::Hd, Subband::Dd];
    pub const DETAILS: [Subband; 3] = [Subband::Vd, Subband::Hd, Subband::Dd];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Subband::Ms => "ms",
            Subband::Vd => "vd",
            Subband::Hd => "hd",
            Subband::Dd => "dd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BankKind {
    /// 4x4 Prewitt-style kernels, reflect padding 1, stride 2.
    Depool4,
    /// 2x2 Haar-style restriction, no padding, stride 2.
    Haar2,
}

/// Four square analysis kernels applied at stride 2.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBank {
    kind: BankKind,
    side: usize,
    kernels: [Vec<f64>; 4],
}

const MS4: [f64; 16] = [1.0; 16];
#[rustfmt::skip]
const VD4: [f64; 16] = [
    -1.0, -1.0, 1.0, 1.0,
    -1.0, -1.0, 1.0, 1.0,
    -1.0, -1.0, 1.0, 1.0,
    -1.0, -1.0, 1.0, 1.0,
];
#[rustfmt::skip]
const HD4: [f64; 16] = [
     1.0,  1.0,  1.0,  1.0,
     1.0,  1.0,  1.0,  1.0,
    -1.0, -1.0, -1.0, -1.0,
    -1.0, -1.0, -1.0, -1.0,
];
#[rustfmt::skip]
const DD4: [f64; 16] = [
     1.0,  0.0,  0.0, -1.0,
     0.0,  1.0, -1.0,  0.0,
     0.0, -1.0,  1.0,  0.0,
    -1.0,  0.0,  0.0,  1.0,
];

impl KernelBank {
    /// The default 4x4 bank.
    pub fn depool4() -> Self {
        KernelBank { kind: BankKind::Depool4, side: 4, kernels: [MS4.to_vec(), VD4.to_vec(), HD4.to_vec(), DD4.to_vec()] }
    }

    /// The 2x2 ablation bank: an unnormalized Haar filter bank.
    pub fn haar2() -> Self {
        KernelBank {
            kind: BankKind::Haar2,
            side: 2,
            kernels: [vec![1.0, 1.0, 1.0, 1.0], vec![-1.0, 1.0, -1.0, 1.0], vec![1.0, 1.0, -1.0, -1.0], vec![1.0, -1.0, -1.0, 1.0]],
        }
    }

    pub fn from_kind(kind: BankKind) -> Self {
        match kind {
            BankKind::Depool4 => Self::depool4(),
            BankKind::Haar2 => Self::haar2(),
        }
    }

    pub fn kind(&self) -> BankKind {
        self.kind
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub const fn stride(&self) -> usize {
        2
    }

    /// Border width added on every side before correlation.
    pub fn padding(&self) -> usize {
        (self.side - 2) / 2
    }

    /// Row-major taps of one kernel.
    pub fn kernel(&self, band: Subband) -> &[f64] {
        &self.kernels[band.index()]
    }

    /// Sum of taps; `side²` for MS and zero for the detail kernels.
    pub fn tap_sum(&self, band: Subband) -> f64 {
        self.kernel(band).iter().sum()
    }
}

impl fmt::Display for BankKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BankKind::Depool4 => "4x4",
            BankKind::Haar2 => "2x2",
        })
    }
}

impl FromStr for BankKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "4x4" | "4" => Ok(BankKind::Depool4),
            "2x2" | "2" => Ok(BankKind::Haar2),
            other => Err(Error::param(format!("unknown bank {other:?}, expected 4x4 or 2x2"))),
        }
    }
}
