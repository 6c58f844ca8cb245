//! Interference mitigation algorithms and a dispatcher keyed by kind.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::sigsim::{ComplexSignal, SoiConfig};
use crate::{Error, Result};

pub mod filterbank;
pub mod frft;
pub mod notch;
pub mod transversal;

pub use filterbank::{filterbank_mitigate, FilterBankParams};
pub use frft::{frft, frft_mitigate, FrftPlan, FrftSearch};
pub use notch::{estimate_notch_freq, notch_coeffs, notch_mitigate, NotchDesign, DEFAULT_POLE_RADIUS};
pub use transversal::{transversal_mitigate, TransversalParams};

/// Mitigation paths in BER-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MitigationKind {
    Unmitigated,
    FilterBank,
    Transversal,
    Notch,
    Frft,
}

impl MitigationKind {
    pub const ALL: [MitigationKind; 5] = [
        MitigationKind::Unmitigated,
        MitigationKind::FilterBank,
        MitigationKind::Transversal,
        MitigationKind::Notch,
        MitigationKind::Frft,
    ];

    /// The four algorithms, excluding the unmitigated path.
    pub const ALGORITHMS: [MitigationKind; 4] =
        [MitigationKind::FilterBank, MitigationKind::Transversal, MitigationKind::Notch, MitigationKind::Frft];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            MitigationKind::Unmitigated => "Unmitigated",
            MitigationKind::FilterBank => "FilterBank",
            MitigationKind::Transversal => "Transversal",
            MitigationKind::Notch => "Notch",
            MitigationKind::Frft => "FRFT",
        }
    }
}

impl fmt::Display for MitigationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MitigationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parameter(format!("unknown mitigation kind {s:?}")))
    }
}

/// Parameters for every algorithm. The defaults are what dataset
/// generation uses; changing them changes every stored BER.
#[derive(Debug, Clone, PartialEq)]
pub struct MitigationParams {
    pub notch_pole_radius: f64,
    pub frft: FrftSearch,
    pub filterbank: FilterBankParams,
    pub transversal: TransversalParams,
}

impl Default for MitigationParams {
    fn default() -> Self {
        Self {
            notch_pole_radius: DEFAULT_POLE_RADIUS,
            frft: FrftSearch::default(),
            filterbank: FilterBankParams::default(),
            transversal: TransversalParams::default(),
        }
    }
}

/// Runs one mitigation path with explicit parameters and FRFT plan.
pub fn mitigate_with(
    sig: &ComplexSignal,
    kind: MitigationKind,
    cfg: &SoiConfig,
    params: &MitigationParams,
    plan: &FrftPlan,
) -> Result<ComplexSignal> {
    match kind {
        MitigationKind::Unmitigated => Ok(sig.clone()),
        MitigationKind::FilterBank => filterbank_mitigate(sig, cfg.samples_per_symbol, &params.filterbank),
        MitigationKind::Transversal => transversal_mitigate(sig, cfg, &params.transversal),
        MitigationKind::Notch => notch_mitigate(sig, params.notch_pole_radius),
        MitigationKind::Frft => frft_mitigate(sig, plan, &params.frft),
    }
}

/// Plan for the default FRFT block size, built once per process.
pub fn default_frft_plan() -> &'static FrftPlan {
    static PLAN: OnceLock<FrftPlan> = OnceLock::new();
    PLAN.get_or_init(|| FrftPlan::new(FrftSearch::default().block_size).expect("default FRFT block size is valid"))
}

/// Runs one mitigation path with the default parameters.
pub fn mitigate(sig: &ComplexSignal, kind: MitigationKind, cfg: &SoiConfig) -> Result<ComplexSignal> {
    mitigate_with(sig, kind, cfg, &MitigationParams::default(), default_frft_plan())
}
