//! The built-in scenario catalog. Each preset is a complete experiment that
//! exercises one measurable contrast between the linear and classical
//! evolvers; together they cover the whole acceptance surface.

use crate::config::{
    BoundarySpec, ComplexSpec, EvolverSpec, ExperimentConfig, GaussianSpec, GridSpec, InitialSpec,
    OutputSpec, PhysicsSpec, PotentialSpec, ProbeSpec, TimeSpec, TrajectorySpec,
};

pub const PRESET_NAMES: [&str; 12] = [
    "dispersion",
    "soliton_stability",
    "harmonic_ehrenfest",
    "focusing_caustic",
    "interference_classical",
    "interference_linear",
    "pure_vs_mixed",
    "exchange_term",
    "winding",
    "superposition_probe",
    "r_linearity",
    "indirect_momentum",
];

pub fn names() -> &'static [&'static str] {
    &PRESET_NAMES
}

/// One-line description shown by `presets list`.
pub fn summary(name: &str) -> &'static str {
    match name {
        "dispersion" => "linear free packet spreads by the textbook width law",
        "soliton_stability" => "the same narrow packet, evolved classically, keeps its width",
        "harmonic_ehrenfest" => "coherent oscillation with Ehrenfest residual diagnostics",
        "focusing_caustic" => "negatively chirped packet focuses and halts at its caustic",
        "interference_classical" => "same-phase bumps combine without destructive interference",
        "interference_linear" => "momentum-offset bumps produce high-visibility fringes",
        "pure_vs_mixed" => "disjoint-support mixture matches the pure state on diagonal observables",
        "exchange_term" => "two-particle exchange term vanishes for separated packets",
        "winding" => "vortex circulation stays quantized under evolution",
        "superposition_probe" => "classical evolution breaks the superposition principle",
        "r_linearity" => "amplitude additivity under frozen-phase transport",
        "indirect_momentum" => "collapse, drift, collapse again: momentum from two positions",
        _ => "",
    }
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let cfg = match name {
        "dispersion" => dispersion(),
        "soliton_stability" => soliton_stability(),
        "harmonic_ehrenfest" => harmonic_ehrenfest(),
        "focusing_caustic" => focusing_caustic(),
        "interference_classical" => interference_classical(),
        "interference_linear" => interference_linear(),
        "pure_vs_mixed" => pure_vs_mixed(),
        "exchange_term" => exchange_term(),
        "winding" => winding(),
        "superposition_probe" => superposition_probe(),
        "r_linearity" => r_linearity(),
        "indirect_momentum" => indirect_momentum(),
        _ => return None,
    };
    Some(cfg)
}

fn grid_1d(n: usize, half_width: f64) -> GridSpec {
    GridSpec {
        dim: 1,
        n: vec![n],
        bounds: vec![[-half_width, half_width]],
        boundary: BoundarySpec::Periodic,
    }
}

fn base(name: &str, grid: GridSpec, evolver: &str, dt: f64, t_end: f64, stride: usize) -> ExperimentConfig {
    ExperimentConfig {
        scenario: name.to_string(),
        grid,
        physics: PhysicsSpec::default(),
        potential: PotentialSpec {
            kind: "free".to_string(),
            omega: None,
            lambda: None,
            force: None,
            file: None,
        },
        initial: gaussian(&[0.0], 1.0, None, None),
        evolver: EvolverSpec {
            kind: evolver.to_string(),
            c_cfl: None,
            theta_c: None,
        },
        time: TimeSpec {
            dt,
            t_end,
            snapshot_stride: Some(stride),
        },
        trajectories: None,
        probes: Vec::new(),
        output: OutputSpec {
            dir: Some(format!("runs/{name}")),
        },
    }
}

fn gaussian(x0: &[f64], sigma: f64, p0: Option<&[f64]>, chirp: Option<f64>) -> InitialSpec {
    InitialSpec {
        kind: "gaussian".to_string(),
        x0: Some(x0.to_vec()),
        sigma: Some(sigma),
        p0: p0.map(<[f64]>::to_vec),
        chirp,
        a: None,
        b: None,
        c1: None,
        c2: None,
        n: None,
        r0: None,
        file: None,
    }
}

fn two_gaussian(a: GaussianSpec, b: GaussianSpec, c1: f64, c2: f64) -> InitialSpec {
    InitialSpec {
        kind: "two_gaussian".to_string(),
        x0: None,
        sigma: None,
        p0: None,
        chirp: None,
        a: Some(a),
        b: Some(b),
        c1: Some(ComplexSpec { re: c1, im: 0.0 }),
        c2: Some(ComplexSpec { re: c2, im: 0.0 }),
        n: None,
        r0: None,
        file: None,
    }
}

fn bump(x0: f64, sigma: f64, p0: Option<f64>) -> GaussianSpec {
    GaussianSpec {
        x0: vec![x0],
        sigma,
        p0: p0.map(|p| vec![p]),
        chirp: None,
    }
}

fn probe(name: &str) -> ProbeSpec {
    ProbeSpec {
        name: name.to_string(),
        threshold: None,
        expected_n: None,
        radius: None,
        loop_samples: None,
        centers: None,
        sigmas: None,
        supports: None,
        weights: None,
        separation: None,
        sigma: None,
        width: None,
        t1: None,
        t2: None,
        cycles: None,
        seed: None,
    }
}

fn dispersion() -> ExperimentConfig {
    let mut cfg = base("dispersion", grid_1d(1024, 60.0), "linear", 0.01, 2.0, 20);
    cfg.initial = gaussian(&[0.0], 0.1, None, None);
    cfg
}

fn soliton_stability() -> ExperimentConfig {
    let mut cfg = base(
        "soliton_stability",
        grid_1d(512, 4.0),
        "classical",
        0.01,
        2.0,
        20,
    );
    cfg.initial = gaussian(&[0.0], 0.1, None, None);
    cfg
}

fn harmonic_ehrenfest() -> ExperimentConfig {
    let mut cfg = base(
        "harmonic_ehrenfest",
        grid_1d(256, 8.0),
        "linear",
        0.01,
        std::f64::consts::TAU,
        5,
    );
    cfg.potential.kind = "harmonic".to_string();
    cfg.potential.omega = Some(1.0);
    // Coherent-state width for hbar = m = omega = 1.
    cfg.initial = gaussian(&[1.0], 0.5_f64.sqrt(), None, None);
    cfg.trajectories = Some(TrajectorySpec { count: 64, seed: 11 });
    cfg
}

fn focusing_caustic() -> ExperimentConfig {
    let mut cfg = base(
        "focusing_caustic",
        grid_1d(1024, 20.0),
        "classical",
        0.005,
        1.5,
        20,
    );
    cfg.initial = gaussian(&[0.0], 2.0, None, Some(-1.0));
    cfg
}

fn interference_classical() -> ExperimentConfig {
    let mut cfg = base(
        "interference_classical",
        grid_1d(1024, 16.0),
        "classical",
        0.005,
        0.1,
        5,
    );
    let amp = 0.5_f64.sqrt();
    cfg.initial = two_gaussian(bump(-2.5, 1.0, None), bump(2.5, 1.0, None), amp, amp);
    cfg.probes = vec![probe("interference")];
    cfg
}

fn interference_linear() -> ExperimentConfig {
    let mut cfg = base(
        "interference_linear",
        grid_1d(1024, 16.0),
        "linear",
        0.01,
        0.6,
        10,
    );
    // Co-located packets whose momenta differ by 10 hbar/sigma: the fringes
    // fully modulate the overlap window, so visibility comes out near one.
    let amp = 0.5_f64.sqrt();
    cfg.initial = two_gaussian(
        bump(0.0, 1.0, Some(5.0)),
        bump(0.0, 1.0, Some(-5.0)),
        amp,
        amp,
    );
    cfg.probes = vec![probe("interference")];
    cfg
}

fn pure_vs_mixed() -> ExperimentConfig {
    let mut cfg = base(
        "pure_vs_mixed",
        grid_1d(1024, 12.0),
        "classical",
        0.01,
        0.05,
        1,
    );
    cfg.initial = gaussian(&[0.0], 1.0, None, None);
    let mut p = probe("pure_vs_mixed");
    p.centers = Some(vec![-5.0, 4.0]);
    p.sigmas = Some(vec![0.8, 1.1]);
    p.supports = Some(vec![3.0, 3.5]);
    p.weights = Some(vec![0.5, 0.5]);
    cfg.probes = vec![p];
    cfg
}

fn exchange_term() -> ExperimentConfig {
    let mut cfg = base(
        "exchange_term",
        grid_1d(512, 20.0),
        "classical",
        0.01,
        0.05,
        1,
    );
    cfg.initial = gaussian(&[0.0], 1.0, None, None);
    let mut p = probe("exchange");
    p.separation = Some(8.0);
    p.sigma = Some(1.0);
    cfg.probes = vec![p];
    cfg
}

fn winding() -> ExperimentConfig {
    let mut cfg = base(
        "winding",
        GridSpec {
            dim: 2,
            n: vec![256, 256],
            bounds: vec![[-8.0, 8.0], [-8.0, 8.0]],
            boundary: BoundarySpec::Periodic,
        },
        "linear",
        0.01,
        0.1,
        5,
    );
    cfg.initial = InitialSpec {
        kind: "vortex".to_string(),
        x0: None,
        sigma: None,
        p0: None,
        chirp: None,
        a: None,
        b: None,
        c1: None,
        c2: None,
        n: Some(3),
        r0: Some(1.0),
        file: None,
    };
    let mut p = probe("winding");
    p.expected_n = Some(3);
    p.radius = Some(2.0);
    cfg.probes = vec![p];
    cfg
}

fn superposition_probe() -> ExperimentConfig {
    // The box is sized so the Gaussian tails stay representable at the edges;
    // a wider box pushes them under the node tolerance and the probe refuses
    // the polar form.
    let mut cfg = base(
        "superposition_probe",
        grid_1d(2048, 16.0),
        "classical",
        0.01,
        1.0,
        10,
    );
    // The momentum beat steepens under the nonlinear flow and focuses at
    // t ~ 0.45 m; a heavier particle slows the collapse enough for the
    // defect to be measured at t = 1 while staying well clear of the
    // caustic guard.
    cfg.physics.mass = 3.0;
    // |c1| = 3 |c2| keeps the sum node-free; the equal-envelope branches
    // differ only in drift momentum.
    cfg.initial = two_gaussian(
        bump(0.0, 2.0, Some(1.0)),
        bump(0.0, 2.0, Some(-1.0)),
        0.9_f64.sqrt(),
        0.1_f64.sqrt(),
    );
    cfg.probes = vec![probe("superposition_violation")];
    cfg
}

fn r_linearity() -> ExperimentConfig {
    // The expanding flow carries tail material toward the edges; a generous
    // box keeps what reaches the boundary too small to look like a caustic.
    let mut cfg = base(
        "r_linearity",
        grid_1d(512, 20.0),
        "classical",
        0.01,
        0.5,
        5,
    );
    cfg.initial = gaussian(&[0.0], 1.5, Some(&[0.6]), Some(0.2));
    let mut p = probe("r_linearity");
    p.centers = Some(vec![-3.0, 3.0]);
    p.sigmas = Some(vec![1.2, 1.5]);
    p.weights = Some(vec![0.8, 0.6]);
    cfg.probes = vec![p];
    cfg
}

fn indirect_momentum() -> ExperimentConfig {
    let mut cfg = base(
        "indirect_momentum",
        grid_1d(512, 16.0),
        "classical",
        0.02,
        1.0,
        5,
    );
    cfg.initial = gaussian(&[-2.0], 1.0, Some(&[3.0]), None);
    cfg.trajectories = Some(TrajectorySpec { count: 32, seed: 5 });
    let mut p = probe("indirect_momentum");
    p.width = Some(0.5);
    p.t1 = Some(0.0);
    p.t2 = Some(1.0);
    p.cycles = Some(24);
    p.seed = Some(7);
    cfg.probes = vec![p];
    cfg
}
