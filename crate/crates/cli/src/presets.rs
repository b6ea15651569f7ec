//! Built-in run files for the published geometries and the reference
//! configurations of the solver and the separable constructions.

use rte_kernel_lab::config::{
    BoxSpec, CorrelationSpec, FieldSpec, MediumSpec, PcaSpec, PhaseSpec, RankGrowthSpec, ReferenceSpec, RunFile,
    SeparableKind, SeparableSpec, SolveSpec, SolverSpec, SourceSpec,
};
use rte_kernel_lab::solver::SolveMethod;

pub const NAMES: &[&str] = &[
    "fig1-left",
    "fig1-right",
    "fig2-left",
    "fig2-right",
    "phase2d",
    "taylor",
    "harmonic3d",
    "cross-check",
    "contraction",
];

fn unit_square() -> BoxSpec {
    BoxSpec { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] }
}

fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> BoxSpec {
    BoxSpec { lo: vec![x0, y0], hi: vec![x1, y1] }
}

fn correlation(y2: [f64; 2]) -> RunFile {
    RunFile {
        medium: Some(MediumSpec::constant(1.0)),
        correlation: Some(CorrelationSpec {
            x: unit_square(),
            y1: vec![2.0, 0.0],
            y2: y2.to_vec(),
            n_tilde_max: 150.0,
            fit_decades: 1.0,
            samples: 64,
            n_values: None,
        }),
        ..RunFile::default()
    }
}

fn figure2(y: BoxSpec) -> RunFile {
    RunFile {
        medium: Some(MediumSpec::constant(1.0)),
        rank_growth: Some(RankGrowthSpec {
            x: unit_square(),
            y: y.clone(),
            n_values: vec![4, 8, 16, 32],
            epsilons: vec![1e-2, 1e-4],
            criterion: Default::default(),
            points_per_unit: None,
        }),
        pca_bound: Some(PcaSpec {
            x: unit_square(),
            y,
            n_values: vec![8, 16, 32],
            delta: 0.5,
            epsilons: vec![0.5, 1e-2],
        }),
        ..RunFile::default()
    }
}

fn separable(kind: SeparableKind) -> RunFile {
    let spec = match kind {
        SeparableKind::Phase2d => SeparableSpec {
            kind,
            x: unit_square(),
            y: rect(3.0, 4.0, 0.0, 1.0),
            n: 4,
            eps: 1e-6,
            degree: 3,
            check_points_per_dim: Some(64),
        },
        SeparableKind::Taylor => SeparableSpec {
            kind,
            x: unit_square(),
            y: rect(2.0, 3.0, 0.0, 1.0),
            n: 0,
            eps: 1e-4,
            degree: 3,
            check_points_per_dim: Some(32),
        },
        SeparableKind::Harmonic3d => SeparableSpec {
            kind,
            x: BoxSpec { lo: vec![0.0; 3], hi: vec![1.0; 3] },
            y: BoxSpec { lo: vec![2.5; 3], hi: vec![3.5; 3] },
            n: 2,
            eps: 1e-4,
            degree: 3,
            check_points_per_dim: Some(20),
        },
    };
    RunFile { medium: Some(MediumSpec::constant(1.0)), separable: Some(spec), ..RunFile::default() }
}

fn solve(sigma_t: f64, sigma_s: f64, g: f64, reference: bool) -> RunFile {
    RunFile {
        solve: Some(SolveSpec {
            medium: MediumSpec {
                domain: Some(unit_square()),
                sigma_t: FieldSpec::Constant { value: sigma_t },
                sigma_s: Some(FieldSpec::Constant { value: sigma_s }),
                bounds: None,
            },
            phase: PhaseSpec::Hg { g, terms: 3, delta_m: false },
            cells: vec![32, 32],
            sources: vec![SourceSpec { n: 0, re: FieldSpec::Constant { value: 1.0 }, im: None }],
            solver: SolverSpec { method: SolveMethod::FixedPoint, estimate_contraction: true, ..SolverSpec::default() },
            reference: reference.then(ReferenceSpec::default),
        }),
        ..RunFile::default()
    }
}

pub fn preset(name: &str) -> Option<RunFile> {
    Some(match name {
        // X = [0,1]², y1 = (2,0), y2 = (2,1/2).
        "fig1-left" => correlation([2.0, 0.5]),
        // X = [0,1]², y1 = (2,0), y2 = (3/2,0).
        "fig1-right" => correlation([1.5, 0.0]),
        // X = [0,1]², Y = [1.25,2.25]×[0.5,1.5].
        "fig2-left" => figure2(rect(1.25, 2.25, 0.5, 1.5)),
        // X = [0,1]², Y = [1.25,2.25]×[0,1].
        "fig2-right" => figure2(rect(1.25, 2.25, 0.0, 1.0)),
        "phase2d" => separable(SeparableKind::Phase2d),
        "taylor" => separable(SeparableKind::Taylor),
        "harmonic3d" => separable(SeparableKind::Harmonic3d),
        "cross-check" => solve(2.0, 1.0, 0.5, true),
        "contraction" => solve(1.0, 0.5, 0.3, false),
        _ => return None,
    })
}
