//! The canonical run suite: one short configuration per regime of every
//! model. Conservation and the inequality monitors are audited over it.

use polarsim_core::initial::Profile;

use crate::config::{Model, RunConfig};

/// A named configuration of the canonical suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEntry {
    pub name: &'static str,
    pub config: RunConfig,
}

fn entry(name: &'static str, model: Model, mass: f64, t_end: f64, edit: impl FnOnce(&mut RunConfig)) -> SuiteEntry {
    let mut config = RunConfig::minimal(model, mass, t_end);
    edit(&mut config);
    SuiteEntry { name, config }
}

/// Short runs covering global, critical and blow-up regimes of all seven models.
pub fn canonical_suite() -> Vec<SuiteEntry> {
    let step = |width| Some(Profile::Step { width });
    vec![
        entry("bks_subcritical", Model::Bks1d, 0.5, 5.0, |c| c.z_max = Some(30.0)),
        entry("bks_critical", Model::Bks1d, 1.0, 5.0, |c| {
            c.z_max = Some(30.0);
            c.initial = step(2.0);
        }),
        entry("bks_supercritical", Model::Bks1d, 2.0, 1.0, |c| {
            c.z_max = Some(20.0);
            c.initial = step(0.5);
        }),
        entry("bks_noisy", Model::Bks1d, 0.8, 2.0, |c| {
            c.z_max = Some(20.0);
            c.initial = Some(Profile::HalfGaussian { sigma: 2.0, shift: 1.0 });
            c.noise = Some(0.2);
            c.seed = Some(7);
        }),
        entry("rescaled_half_mass", Model::Rescaled1d, 0.5, 4.0, |c| {
            c.z_max = Some(20.0);
            c.initial = step(2.0);
        }),
        entry("rescaled_near_critical", Model::Rescaled1d, 0.9, 2.0, |c| c.z_max = Some(30.0)),
        entry("exchange_supercritical", Model::Exchange1d, 2.0, 5.0, |c| {
            c.z_max = Some(30.0);
            c.initial = step(1.0);
        }),
        entry("exchange_subcritical", Model::Exchange1d, 0.8, 5.0, |c| {
            c.z_max = Some(30.0);
            c.gamma = Some(1.5);
            c.mu0 = Some(0.3);
        }),
        entry("interval_blowup", Model::Interval1d, 2.0, 2.0, |c| {
            c.length = Some(10.0);
            c.initial = step(1.0);
        }),
        entry("interval_spread", Model::Interval1d, 2.0, 5.0, |c| {
            c.length = Some(10.0);
            c.initial = step(10.0);
        }),
        entry("range_blowup", Model::Range1d, 2.0, 2.0, |c| {
            c.z_max = Some(20.0);
            c.alpha = Some(1.0);
            c.initial = step(0.25);
        }),
        entry("range_subcritical", Model::Range1d, 0.8, 5.0, |c| {
            c.z_max = Some(20.0);
            c.alpha = Some(0.5);
        }),
        entry("transversal_large_mass", Model::Transversal2d, 3.0, 0.5, |c| {
            c.ny = Some(32);
            c.nz = Some(32);
            c.y_sigma = Some(2.0);
        }),
        entry("potential_concentrated", Model::Potential2d, 3.0, 0.2, |c| {
            c.y_min = Some(-3.0);
            c.y_max = Some(3.0);
            c.z_max = Some(3.0);
            c.ny = Some(32);
            c.nz = Some(32);
            c.y_sigma = Some(0.2);
            c.initial = step(0.2);
        }),
        entry("potential_diffuse", Model::Potential2d, 0.05, 0.5, |c| {
            c.y_min = Some(-3.0);
            c.y_max = Some(3.0);
            c.z_max = Some(3.0);
            c.ny = Some(32);
            c.nz = Some(32);
            c.y_sigma = Some(1.0);
            c.c_2d = Some(1.0);
        }),
    ]
}
