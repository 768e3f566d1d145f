use serde::{Deserialize, Serialize};

use crate::estimator::{CauchyDiffusion, FitConfig};

use super::{ExperimentConfig, X0Spec};

/// One line of the benchmark table with its published errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub id: &'static str,
    pub system: &'static str,
    pub alpha: f64,
    pub per_axis: usize,
    /// Extra initial points placed evenly inside (0, 1).
    pub extra_in_unit: usize,
    pub reps: usize,
    /// Repetitions used by default; `reps` is the published scale.
    pub desk_reps: usize,
    pub h: f64,
    pub published_l2_f: f64,
    pub published_l2_g: f64,
}

const fn row(
    id: &'static str,
    system: &'static str,
    alpha: f64,
    per_axis: usize,
    reps: usize,
    h: f64,
    published_l2_f: f64,
    published_l2_g: f64,
) -> TableRow {
    TableRow {
        id,
        system,
        alpha,
        per_axis,
        extra_in_unit: 0,
        reps,
        desk_reps: reps,
        h,
        published_l2_f,
        published_l2_g,
    }
}

pub const TABLE_ROWS: &[TableRow] = &[
    row("cauchy_ou_add", "cauchy_ou_add", 1.0, 10000, 1, 0.01, 0.0021, 0.0004),
    row(
        "cauchy_square_add",
        "cauchy_square_add",
        1.0,
        10000,
        1,
        0.01,
        0.0020,
        0.0000,
    ),
    row("cauchy_sin_add", "cauchy_sin_add", 1.0, 10000, 1, 0.01, 0.0080, 0.0017),
    row("cauchy_ou_mult", "cauchy_ou_mult", 1.0, 20, 1000, 0.01, 0.0041, 0.0147),
    row(
        "cauchy_square_mult",
        "cauchy_square_mult",
        1.0,
        20,
        1000,
        0.01,
        0.0344,
        0.0136,
    ),
    row(
        "cauchy_sin_mult",
        "cauchy_sin_mult",
        1.0,
        20,
        1000,
        0.01,
        0.0054,
        0.0173,
    ),
    row("a15_ou_add", "ou_add", 1.5, 5, 1000, 0.1, 0.0038, 0.0007),
    row(
        "a15_double_well_add",
        "double_well_add",
        1.5,
        50,
        1000,
        0.5,
        0.0010,
        0.0003,
    ),
    row(
        "a15_log_cuberoot_add",
        "log_cuberoot_add",
        1.5,
        50,
        1000,
        0.5,
        0.0003,
        0.0008,
    ),
    row(
        "a15_double_well_linear_mult",
        "double_well_linear_mult",
        1.5,
        50,
        1000,
        0.5,
        0.0009,
        0.0007,
    ),
    TableRow {
        extra_in_unit: 25,
        ..row(
            "a15_double_well_sin_mult",
            "double_well_sin_mult",
            1.5,
            50,
            1000,
            0.5,
            0.0006,
            0.0108,
        )
    },
    row("a05_ou_add", "ou_add", 0.5, 5, 1000, 0.1, 0.0001, 0.0045),
    row(
        "a05_double_well_add",
        "double_well_add",
        0.5,
        50,
        1000,
        0.5,
        0.0002,
        0.0010,
    ),
    row(
        "a05_ou_linear_mult",
        "ou_linear_mult",
        0.5,
        5,
        1000,
        0.1,
        0.0001,
        0.0139,
    ),
    row(
        "a05_double_well_linear_mult",
        "double_well_linear_mult",
        0.5,
        75,
        1000,
        0.5,
        0.0002,
        0.0047,
    ),
    row("km_compare", "km_compare", 1.5, 50, 1000, 0.5, 0.0014, 0.0003),
    TableRow {
        desk_reps: 100,
        ..row("maier_stein", "maier_stein", 1.5, 40, 1000, 0.5, 0.0014, 0.0026)
    },
    row(
        "coupled_linear_2d",
        "coupled_linear_2d",
        1.5,
        5,
        1000,
        0.5,
        0.0024,
        0.0020,
    ),
];

pub fn find_row(id: &str) -> Option<&'static TableRow> {
    TABLE_ROWS.iter().find(|r| r.id == id)
}

impl TableRow {
    /// Experiment for this row at desk scale, or at the published scale
    /// when `full` is set.
    pub fn experiment(&self, full: bool, seed: u64) -> ExperimentConfig {
        let extra = (0..self.extra_in_unit)
            .map(|i| vec![(i as f64 + 0.5) / self.extra_in_unit as f64])
            .collect();
        let mut fit = FitConfig::for_alpha(self.alpha);
        if self.alpha == 1.0 {
            fit.cauchy_diffusion = if self.system.ends_with("_mult") {
                CauchyDiffusion::PerGroup
            } else {
                CauchyDiffusion::Pooled
            };
        }
        ExperimentConfig {
            system: self.system.to_string(),
            alpha: self.alpha,
            x0: X0Spec {
                per_axis: self.per_axis,
                domain: None,
                extra,
            },
            reps: if full { self.reps } else { self.desk_reps },
            h: self.h,
            fit: Some(fit),
            seed,
            output_dir: None,
            published_reps: Some(self.reps),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde_sim::builtin_system;

    #[test]
    fn rows_reference_registered_systems() {
        for r in TABLE_ROWS {
            assert!(builtin_system(r.system).is_ok(), "{}", r.id);
            let cfg = r.experiment(false, 0);
            cfg.validate().unwrap();
        }
        let sin = find_row("a15_double_well_sin_mult").unwrap();
        let pts = sin.experiment(true, 0).x0_points().unwrap();
        assert_eq!(pts.len(), 75);
        assert!(pts[50..].iter().all(|p| p[0] > 0.0 && p[0] < 1.0));
        assert_eq!(find_row("maier_stein").unwrap().experiment(false, 0).reps, 100);
        assert_eq!(find_row("maier_stein").unwrap().experiment(true, 0).reps, 1000);
    }
}
