//! Cross-module checks of the Monte Carlo harness through the public API.
//!
//! The key contract here is reference coupling: every estimator consumes
//! exactly the coarsened increments of one noise grid per path, reduced in
//! a fixed order. These tests recompute the published numbers from scratch
//! with the public building blocks and demand bit equality.

use aitsahalia::scalar::pairwise_sum;
use aitsahalia::{
    coarsen, generate, moment_probe, negative_census, simulate_path, simulate_with_increments,
    strong_error, ErrorMode, ExperimentSpecF64, GridConfigF64, JumpSpecF64, ModelParamsF64,
    SchemeKind,
};

fn strict_params() -> ModelParamsF64 {
    ModelParamsF64 {
        a_neg1: 2.0,
        a0: 1.0,
        a1: 1.5,
        a2: 5.0,
        b: 1.0,
        gamma: 3.5,
        theta: 2.0,
        lambda: 1.0,
        x0: 1.0,
    }
}

fn convergence_spec(paths: usize) -> ExperimentSpecF64 {
    ExperimentSpecF64 {
        params: strict_params(),
        jump: JumpSpecF64::linear_scale(-0.2).unwrap(),
        grid: GridConfigF64 {
            t_horizon: 1.0,
            fine_level: 7,
            coarse_levels: vec![3, 4, 7],
        },
        num_paths: paths,
        base_seed: 97,
        scheme: SchemeKind::Bem,
        levels_under_test: vec![3, 4],
        reference_level: 7,
        error_mode: ErrorMode::Terminal,
    }
}

#[test]
fn strong_error_equals_a_from_scratch_recomputation() {
    let spec = convergence_spec(64);
    let report = strong_error(&spec).unwrap();

    // rebuild the estimate path by path with the public primitives,
    // consuming the coarsened increments explicitly
    for (k, &level) in [3u32, 4].iter().enumerate() {
        let mut sq = Vec::with_capacity(spec.num_paths);
        for path in 0..spec.num_paths {
            let grid = generate(&spec.grid, spec.params.lambda, spec.base_seed, path as u64)
                .unwrap();
            let reference =
                simulate_path(&spec.params, &spec.jump, spec.scheme, &grid, 7, false).unwrap();
            let (dw, dn) = coarsen(&grid, level).unwrap();
            let run = simulate_with_increments(
                &spec.params,
                &spec.jump,
                spec.scheme,
                grid.step_size(level),
                &dw,
                &dn,
                false,
            )
            .unwrap();
            let d = run.terminal - reference.terminal;
            sq.push(d * d);
        }
        let rms = (pairwise_sum(&sq) / spec.num_paths as f64).sqrt();
        assert_eq!(
            rms.to_bits(),
            report.rms_errors[k].to_bits(),
            "level {level}: harness and manual recomputation disagree"
        );
    }
}

#[test]
fn census_equals_a_manual_path_count() {
    let spec = ExperimentSpecF64 {
        params: strict_params(),
        jump: JumpSpecF64::identity(),
        grid: GridConfigF64 {
            t_horizon: 1.0,
            fine_level: 3,
            coarse_levels: vec![3],
        },
        num_paths: 500,
        base_seed: 31,
        scheme: SchemeKind::Em,
        levels_under_test: vec![3],
        reference_level: 3,
        error_mode: ErrorMode::Terminal,
    };
    let census = negative_census(&spec).unwrap();

    let mut negative = 0usize;
    let mut diverged = 0usize;
    for path in 0..spec.num_paths {
        let grid = generate(&spec.grid, spec.params.lambda, spec.base_seed, path as u64).unwrap();
        let r = simulate_path(&spec.params, &spec.jump, spec.scheme, &grid, 3, false).unwrap();
        if !r.positive {
            negative += 1;
        }
        if r.diverged {
            diverged += 1;
        }
    }
    assert_eq!(census.negative, negative);
    assert_eq!(census.diverged, diverged);
    assert_eq!(census.total, spec.num_paths);
}

#[test]
fn moment_probe_matches_trajectory_averages() {
    let mut spec = convergence_spec(40);
    spec.levels_under_test = vec![4];
    spec.grid.coarse_levels = vec![4];
    spec.grid.fine_level = 4;
    spec.reference_level = 4;
    let estimates = moment_probe(&spec, 2.0, false).unwrap();
    assert_eq!(estimates.len(), 17);

    // column-wise recomputation
    let mut columns: Vec<Vec<f64>> = (0..17).map(|_| Vec::with_capacity(spec.num_paths)).collect();
    for path in 0..spec.num_paths {
        let grid = generate(&spec.grid, spec.params.lambda, spec.base_seed, path as u64).unwrap();
        let r = simulate_path(&spec.params, &spec.jump, spec.scheme, &grid, 4, true).unwrap();
        for (n, &y) in r.trajectory.unwrap().iter().enumerate() {
            columns[n].push(y * y);
        }
    }
    for (n, col) in columns.iter().enumerate() {
        let mean = pairwise_sum(col) / spec.num_paths as f64;
        assert_eq!(mean.to_bits(), estimates[n].to_bits(), "grid point {n}");
    }
}

#[test]
fn reports_are_identical_across_thread_counts() {
    // the fixed-order reduction must make the pool size invisible
    let spec = convergence_spec(96);
    let baseline = strong_error(&spec).unwrap();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| strong_error(&spec).unwrap());
    assert_eq!(baseline, single);
    for (a, b) in baseline.rms_errors.iter().zip(&single.rms_errors) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
