//! Built-in experiment presets (embedded TOML configs).
//!
//! A preset may consist of several config parts whose rows land in one CSV;
//! the `matrix_kind`/`gram`/`detector` columns keep the parts apart.

use std::path::PathBuf;

use anyhow::{bail, Result};

use crate::config::ExperimentConfig;
use rdmud_core::mc::SweepPlan;

struct Preset {
    name: &'static str,
    about: &'static str,
    parts: &'static [&'static str],
}

const PRESETS: &[Preset] = &[
    Preset {
        name: "table1",
        about: "symbol-stage error table, Gold Gram, M in {5,9,18,37}",
        parts: &[include_str!("../presets/table1.toml")],
    },
    Preset {
        name: "fig3",
        about: "P_e vs M, K = 2, tuned thresholds (reconstructed grid)",
        parts: &[include_str!("../presets/fig3.toml")],
    },
    Preset {
        name: "fig4",
        about: "P_e vs M at K = 4, tuned thresholds (reconstructed grid)",
        parts: &[include_str!("../presets/fig4.toml")],
    },
    Preset {
        name: "fig5a",
        about: "partial DFT vs Gaussian matrices, N = 100, K = 6",
        parts: &[
            include_str!("../presets/fig5a_dft.toml"),
            include_str!("../presets/fig5a_gaussian.toml"),
        ],
    },
    Preset {
        name: "fig5b",
        about: "P_e vs K at N = 32, M = 16: DFT vs Gaussian vs Kerdock",
        parts: &[
            include_str!("../presets/fig5b_dft.toml"),
            include_str!("../presets/fig5b_gaussian.toml"),
            include_str!("../presets/fig5b_kerdock.toml"),
        ],
    },
    Preset {
        name: "fig6",
        about: "Kerdock set, P_e vs K, near-far gains (desk-scale 64x4096)",
        parts: &[include_str!("../presets/fig6.toml")],
    },
    Preset {
        name: "fig7",
        about: "noise phase transition: P_e vs sigma2, plus decorrelator baseline",
        parts: &[
            include_str!("../presets/fig7_rdmud.toml"),
            include_str!("../presets/fig7_decorrelator.toml"),
        ],
    },
    Preset {
        name: "fig8",
        about: "near-far gains uniform[1,1.5]: RDD vs RDDF",
        parts: &[include_str!("../presets/fig8.toml")],
    },
    Preset {
        name: "fig10a",
        about: "whitening on the Gold Gram, sigma2 = 0.005",
        parts: &[include_str!("../presets/fig10a.toml")],
    },
    Preset {
        name: "fig10b",
        about: "whitening on the Gold Gram, sigma2 = 0.01",
        parts: &[include_str!("../presets/fig10b.toml")],
    },
    Preset {
        name: "fig10c",
        about: "whitening on the simulated lambda_max(G^-1)=400 Gram, sigma2 = 0.005",
        parts: &[include_str!("../presets/fig10c.toml")],
    },
    Preset {
        name: "fig10d",
        about: "whitening on the simulated lambda_max(G^-1)=400 Gram, sigma2 = 0.01",
        parts: &[include_str!("../presets/fig10d.toml")],
    },
];

pub fn catalog() -> impl Iterator<Item = (&'static str, &'static str)> {
    PRESETS.iter().map(|p| (p.name, p.about))
}

/// Resolve a preset into named sweep plans plus its default output path.
pub fn build(
    name: &str,
    trials_override: Option<u64>,
) -> Result<(Vec<(String, SweepPlan)>, PathBuf)> {
    let Some(preset) = PRESETS.iter().find(|p| p.name == name) else {
        let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        bail!("unknown preset `{name}`; available: {}", names.join(", "));
    };
    let mut plans = Vec::new();
    let mut out = PathBuf::from(format!("{name}.csv"));
    for (i, text) in preset.parts.iter().enumerate() {
        let cfg = ExperimentConfig::parse(text)?;
        if i == 0 {
            if let Some(o) = &cfg.experiment.output {
                out = o.clone();
            }
        }
        let label = cfg
            .experiment
            .name
            .clone()
            .unwrap_or_else(|| format!("{name}-{i}"));
        plans.push((label, cfg.sweep_plan(trials_override)?));
    }
    Ok((plans, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses_and_resolves() {
        for (name, _) in catalog() {
            let (plans, out) = build(name, Some(10)).unwrap_or_else(|e| {
                panic!("preset {name} failed to resolve: {e:#}");
            });
            assert!(!plans.is_empty());
            assert!(out.to_string_lossy().ends_with(".csv"));
        }
    }
}
