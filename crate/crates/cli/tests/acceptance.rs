//! Acceptance suite: nine criteria exercising the full stack at desk scale.
//! Each test prints a single `criterion N: PASS/FAIL` line (visible with
//! `cargo test --test acceptance -- --nocapture`); tolerances are pinned
//! in the assertions. Long flows are shared between criteria.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;
use wloja::samples;
use wloja_core::flows::{atomic_flow, solve, SolverControls, Trajectory};
use wloja_core::functionals::{
    barenblatt_profile, gibbs_profile, EnergyFunctional, EntropyKernel, Normalizer,
};
use wloja_core::loja::{
    fit_exponent, functional_margin, gradient_margin, lifted_exponent, lsi_talagrand_report,
    rate_bound, verify_bounds, FitKind, LojaEstimate,
};
use wloja_core::measures::{AtomicMeasure, Grid1D, GridMeasure, Measure};
use wloja_core::numeric::ols;
use wloja_core::potentials::{holley_stroock_rate, Potential};
use wloja_core::transport::{w2_atomic, w2_grid, w2_oracle};

fn report(n: usize, failures: Vec<String>, detail: String) {
    if failures.is_empty() {
        println!("criterion {n}: PASS — {detail}");
    } else {
        let joined = failures.join("; ");
        println!("criterion {n}: FAIL — {joined}");
        panic!("criterion {n}: {joined}");
    }
}

fn check(failures: &mut Vec<String>, ok: bool, msg: impl FnOnce() -> String) {
    if !ok {
        failures.push(msg());
    }
}

// --------------------------------------------------------- shared fixtures

struct GridRun {
    traj: Trajectory,
    jhat: f64,
}

/// Ornstein-Uhlenbeck benchmark: KL against the standard Gaussian, start
/// N(1, 1), so J(t) = e^{-2t}/2 in the continuum.
fn ou_run() -> &'static GridRun {
    static RUN: OnceLock<GridRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let g = Grid1D::new(-8.0, 8.0, 800).unwrap();
        let v = Potential::quadratic(1.0).unwrap();
        let reference = gibbs_profile(&v, g).unwrap().profile;
        let j = EnergyFunctional::relative_internal(EntropyKernel::boltzmann(), reference);
        let rho0 = GridMeasure::gaussian(g, 1.0, 1.0).unwrap();
        let c = SolverControls::new(2.0).unwrap().with_snapshot_stride(250).unwrap();
        GridRun { traj: solve(&rho0, &j, &v, 1.0, &c).unwrap(), jhat: 0.0 }
    })
}

struct PmeRun {
    traj: Trajectory,
    jhat: f64,
    sigma: f64,
    equilibrium: GridMeasure,
}

/// Porous medium m = 2 under V = x²/2 from uniform on [-1, 1].
fn pme_run() -> &'static PmeRun {
    static RUN: OnceLock<PmeRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let g = Grid1D::new(-8.0, 8.0, 800).unwrap();
        let v = Potential::quadratic(1.0).unwrap();
        let j = EnergyFunctional::internal_plus_potential(
            EntropyKernel::power(2.0).unwrap(),
            v.clone(),
            g,
        )
        .unwrap();
        let profile = barenblatt_profile(&v, 2.0, g).unwrap();
        let sigma = match profile.normalizer {
            Normalizer::Barenblatt { sigma } => sigma,
            other => panic!("unexpected normalizer {other:?}"),
        };
        let rho0 = GridMeasure::uniform(g, -1.0, 1.0).unwrap();
        let c = SolverControls::new(5.0).unwrap().with_snapshot_stride(500).unwrap();
        PmeRun {
            traj: solve(&rho0, &j, &v, 2.0, &c).unwrap(),
            jhat: j.min_value(),
            sigma,
            equilibrium: j.equilibrium().unwrap().clone(),
        }
    })
}

/// Perturbed potential x²/2 + cos x from N(2, 1); Holley-Stroock regime.
fn hs_run() -> &'static GridRun {
    static RUN: OnceLock<GridRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let g = Grid1D::new(-8.0, 8.0, 400).unwrap();
        let v = Potential::quad_plus_cos(1.0, 1.0).unwrap();
        let reference = gibbs_profile(&v, g).unwrap().profile;
        let j = EnergyFunctional::relative_internal(EntropyKernel::boltzmann(), reference);
        let rho0 = GridMeasure::gaussian(g, 2.0, 1.0).unwrap();
        let c = SolverControls::new(3.0).unwrap().with_snapshot_stride(150).unwrap();
        GridRun { traj: solve(&rho0, &j, &v, 1.0, &c).unwrap(), jhat: 0.0 }
    })
}

/// Single atom at 0.7 in V = |x|: freezes at the origin at exactly t = 0.7.
fn atom_run() -> &'static Trajectory {
    static RUN: OnceLock<Trajectory> = OnceLock::new();
    RUN.get_or_init(|| {
        let v = Potential::abs().unwrap();
        let mu0 = AtomicMeasure::dirac(0.7).unwrap();
        let c = SolverControls::new(1.0).unwrap();
        atomic_flow(&mu0, &v, &c).unwrap()
    })
}

fn random_atoms(rng: &mut ChaCha8Rng, max_atoms: usize) -> AtomicMeasure {
    let n = rng.random_range(1..=max_atoms);
    AtomicMeasure::new(
        (0..n).map(|_| (rng.random_range(-5.0..5.0), rng.random_range(0.01..1.0))).collect(),
    )
    .unwrap()
}

// ---------------------------------------------------------------- criteria

#[test]
fn criterion_1_transport_oracle_equivalence() {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let a = random_atoms(&mut rng, 50);
        let b = random_atoms(&mut rng, 50);
        let fast = w2_atomic(&a, &b);
        let (slow, plan) = w2_oracle(&a, &b).unwrap();
        let gap = (fast - slow).abs() / slow.max(1.0);
        worst = worst.max(gap);
        check(&mut failures, gap <= 1e-10, || format!("pair {i}: relative gap {gap:e}"));
        check(&mut failures, plan.validate(&a, &b, 1e-10).is_ok(), || {
            format!("pair {i}: invalid oracle plan")
        });
    }
    report(1, failures, format!("200 atomic pairs, worst relative gap {worst:e}"));
}

#[test]
fn criterion_2_gaussian_closed_forms() {
    let mut failures = Vec::new();
    let g = Grid1D::new(-8.0, 8.0, 800).unwrap();
    let v = Potential::quadratic(1.0).unwrap();
    let reference = gibbs_profile(&v, g).unwrap().profile;
    let j = EnergyFunctional::relative_internal(EntropyKernel::boltzmann(), reference.clone());
    let rho = GridMeasure::gaussian(g, 0.5, 1.0).unwrap();
    let mu = Measure::Grid(rho.clone());

    let entropy = j.energy(&mu).unwrap().value().unwrap();
    let slope = j.slope(&mu).unwrap();
    let fisher = slope * slope;
    let w = w2_grid(&rho, &reference);
    check(&mut failures, (entropy - 0.125).abs() <= 1e-3, || format!("entropy {entropy}"));
    check(&mut failures, (fisher - 0.25).abs() <= 1e-3, || format!("fisher {fisher}"));
    check(&mut failures, (w - 0.5).abs() <= 1e-3, || format!("w2 {w}"));

    let (lsi, talagrand) = lsi_talagrand_report(&rho, &v).unwrap();
    check(&mut failures, lsi.margins.iter().all(|m| m.abs() <= 1e-3), || {
        format!("lsi margin {}", lsi.min_margin)
    });
    check(&mut failures, talagrand.margins.iter().all(|m| m.abs() <= 1e-3), || {
        format!("talagrand margin {}", talagrand.min_margin)
    });
    report(
        2,
        failures,
        format!("entropy {entropy:.6}, fisher {fisher:.6}, w2 {w:.6}, both margins saturate"),
    );
}

#[test]
fn criterion_3_exponential_convergence_on_ou() {
    let mut failures = Vec::new();
    let run = ou_run();
    let ts = &run.traj.times;
    let lnj: Vec<f64> = run.traj.energies.iter().map(|j| (j - run.jhat).ln()).collect();
    let (_, b, _) = ols(ts, &lnj);
    let rate = -b;
    check(&mut failures, (rate - 2.0).abs() <= 0.06, || format!("decay rate {rate}"));

    let est = LojaEstimate::from_gradient(0.5, 2.0f64.sqrt(), run.jhat).unwrap();
    let bounds = verify_bounds(&run.traj, &est, 0.05).unwrap();
    check(&mut failures, bounds.violations.is_empty(), || {
        format!("{} bound violations", bounds.violations.len())
    });
    report(
        3,
        failures,
        format!("fitted rate {rate:.4} vs 2, zero bound violations on {} snapshots", ts.len()),
    );
}

#[test]
fn criterion_4_finite_time_stabilization() {
    let mut failures = Vec::new();
    let traj = atom_run();
    let stop = traj.stabilized_at;
    check(&mut failures, stop.is_some_and(|t| (t - 0.7).abs() <= 1e-6), || {
        format!("stop time {stop:?}")
    });
    let mut worst = 0.0f64;
    for (t, j) in traj.times.iter().zip(&traj.energies) {
        let (j_bound, _, _) = rate_bound(1.0, 1.0, 0.7, 0.0, *t);
        let gap = (j - j_bound).abs();
        worst = worst.max(gap);
        check(&mut failures, gap <= 1e-8, || format!("t = {t}: J = {j} vs bound {j_bound}"));
    }
    report(
        4,
        failures,
        format!("stop time {:?}, worst |J - bound| = {worst:e}", stop.unwrap()),
    );
}

#[test]
fn criterion_5_porous_medium_equilibration() {
    let mut failures = Vec::new();
    let run = pme_run();
    let sigma_exact = (3.0f64 / 8.0).powf(2.0 / 3.0);
    check(&mut failures, (run.sigma - sigma_exact).abs() <= 1e-6, || {
        format!("sigma {} vs {sigma_exact}", run.sigma)
    });

    let last = match run.traj.final_state() {
        Measure::Grid(g) => g.clone(),
        other => panic!("grid flow ended in {other:?}"),
    };
    let l1 = last.l1_distance(&run.equilibrium).unwrap();
    check(&mut failures, l1 <= 1e-2, || format!("L1 distance {l1}"));

    let est = LojaEstimate::from_gradient(0.5, 2.0f64.sqrt(), run.jhat).unwrap();
    let gradient_samples: Vec<(f64, f64)> =
        run.traj.energies.iter().cloned().zip(run.traj.slopes.iter().cloned()).collect();
    let gn = gradient_margin(&gradient_samples, &est, 1e-3).unwrap();
    check(&mut failures, gn.pass, || format!("gn margin {}", gn.min_margin));
    let functional_samples: Vec<(f64, f64)> =
        run.traj.energies.iter().cloned().zip(run.traj.distances.iter().cloned()).collect();
    let ohta = functional_margin(&functional_samples, &est, 1e-3).unwrap();
    check(&mut failures, ohta.pass, || format!("ohta margin {}", ohta.min_margin));

    report(
        5,
        failures,
        format!(
            "sigma error {:e}, L1 = {l1:e}, margins {:.4}/{:.4}",
            (run.sigma - sigma_exact).abs(),
            gn.min_margin,
            ohta.min_margin
        ),
    );
}

#[test]
fn criterion_6_equivalence_on_perturbed_gaussians() {
    let mut failures = Vec::new();
    let g = Grid1D::new(-8.0, 8.0, 400).unwrap();
    let v = Potential::quadratic(1.0).unwrap();
    let reference = gibbs_profile(&v, g).unwrap().profile;
    let j = EnergyFunctional::relative_internal(EntropyKernel::boltzmann(), reference.clone());

    let est = LojaEstimate::from_gradient(0.5, 2.0f64.sqrt(), 0.0).unwrap();
    check(&mut failures, (est.c_f - 0.5).abs() <= 1e-15, || {
        format!("converted c_f {}", est.c_f)
    });

    let densities = samples::perturbed_gaussians(g, 100, 7).unwrap();
    let mut gradient_samples = Vec::new();
    let mut functional_samples = Vec::new();
    for rho in &densities {
        let mu = Measure::Grid(rho.clone());
        let e = j.energy(&mu).unwrap().value().unwrap();
        gradient_samples.push((e, j.slope(&mu).unwrap()));
        functional_samples.push((e, w2_grid(rho, &reference)));
    }
    let grad = gradient_margin(&gradient_samples, &est, 1e-3).unwrap();
    let func = functional_margin(&functional_samples, &est, 1e-3).unwrap();
    check(&mut failures, grad.pass, || format!("gradient margin {}", grad.min_margin));
    check(&mut failures, func.pass, || format!("functional margin {}", func.min_margin));
    report(
        6,
        failures,
        format!(
            "100 samples, min margins {:.4} (gradient) / {:.4} (functional)",
            grad.min_margin, func.min_margin
        ),
    );
}

#[test]
fn criterion_7_holley_stroock_decay() {
    let mut failures = Vec::new();
    let cg2 = holley_stroock_rate(1.0, 2.0);
    check(&mut failures, (cg2 - 2.0 * (-2.0f64).exp()).abs() <= 1e-15, || {
        format!("rate {cg2}")
    });

    let run = hs_run();
    let j0 = run.traj.energies[0] - run.jhat;
    let mut worst = 0.0f64;
    for (t, j) in run.traj.times.iter().zip(&run.traj.energies) {
        let bound = j0 * (-cg2 * t).exp() * 1.05;
        let ratio = (j - run.jhat) / bound;
        worst = worst.max(ratio);
        check(&mut failures, j - run.jhat <= bound, || {
            format!("t = {t}: J = {j} above bound {bound}")
        });
    }
    report(
        7,
        failures,
        format!("J(t) under the 2e^{{-2}} decay bound at all {} snapshots (worst ratio {worst:.3})",
            run.traj.len()),
    );
}

#[test]
fn criterion_8_lifting_and_dirac_fit() {
    let mut failures = Vec::new();
    let lifted = lifted_exponent(1.0, 1);
    check(&mut failures, lifted == 0.75, || format!("lifted exponent {lifted}"));

    let pairs = samples::dirac_path(0.1, 0.9, 9).unwrap();
    let fit = fit_exponent(&pairs, 0.0, FitKind::Functional).unwrap();
    check(&mut failures, (fit.theta - 0.5).abs() <= 1e-10, || format!("theta {}", fit.theta));
    check(&mut failures, (fit.c_f - 1.0).abs() <= 1e-10, || format!("c_f {}", fit.c_f));
    report(
        8,
        failures,
        format!("lifted(1,1) = {lifted}, fitted theta = {}, c_f = {}", fit.theta, fit.c_f),
    );
}

#[test]
fn criterion_9_property_suites() {
    let mut failures = Vec::new();

    let runs: [(&str, &Trajectory); 4] = [
        ("ou", &ou_run().traj),
        ("pme", &pme_run().traj),
        ("hs", &hs_run().traj),
        ("atom", atom_run()),
    ];
    for (name, traj) in runs {
        let mass_err =
            traj.states.iter().map(|s| (s.mass() - 1.0).abs()).fold(0.0f64, f64::max);
        check(&mut failures, mass_err <= 1e-10, || format!("{name}: mass error {mass_err:e}"));
        let positive = traj.states.iter().all(|s| match s {
            Measure::Grid(g) => g.density().iter().all(|d| *d >= 0.0),
            Measure::Atomic(a) => a.weights().iter().all(|w| *w > 0.0),
        });
        check(&mut failures, positive, || format!("{name}: negative values"));
        let slack = 1e-10 * (1.0 + traj.energies[0].abs());
        for (k, w) in traj.energies.windows(2).enumerate() {
            check(&mut failures, w[1] <= w[0] + slack, || {
                format!("{name}: energy rises at snapshot {}", k + 1)
            });
        }
    }

    // dissipation identity -dJ/dt = slope² on the OU run, trapezoid in time
    let ou = &ou_run().traj;
    for k in 1..ou.len() {
        let s2 = 0.5 * (ou.slopes[k - 1].powi(2) + ou.slopes[k].powi(2));
        let d = ou.dissipations[k];
        check(&mut failures, (d - s2).abs() <= 0.05 * s2 + 1e-6, || {
            format!("dissipation at snapshot {k}: {d} vs slope² {s2}")
        });
    }

    // convexity inequality: (J[nu] - J[mu]) / W₂ ≤ slope[nu] on 50 pairs
    let g = Grid1D::new(-8.0, 8.0, 400).unwrap();
    let v = Potential::quadratic(1.0).unwrap();
    let reference = gibbs_profile(&v, g).unwrap().profile;
    let j = EnergyFunctional::relative_internal(EntropyKernel::boltzmann(), reference);
    let densities = samples::perturbed_gaussians(g, 100, 23).unwrap();
    for (i, pair) in densities.chunks(2).enumerate() {
        let (mu, nu) = (&pair[0], &pair[1]);
        let emu = j.energy(&Measure::Grid(mu.clone())).unwrap().value().unwrap();
        let enu = j.energy(&Measure::Grid(nu.clone())).unwrap().value().unwrap();
        let s = j.slope(&Measure::Grid(nu.clone())).unwrap();
        let w = w2_grid(mu, nu);
        if w > 1e-12 {
            check(&mut failures, (enu - emu) / w <= s + 1e-3 * (1.0 + s), || {
                format!("convexity violated on pair {i}")
            });
        }
    }

    // metric axioms on 100 random atomic triples
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for i in 0..100 {
        let a = random_atoms(&mut rng, 20);
        let b = random_atoms(&mut rng, 20);
        let c = random_atoms(&mut rng, 20);
        let dab = w2_atomic(&a, &b);
        let dba = w2_atomic(&b, &a);
        let dac = w2_atomic(&a, &c);
        let dcb = w2_atomic(&c, &b);
        check(&mut failures, (dab - dba).abs() <= 1e-12 * (1.0 + dab), || {
            format!("triple {i}: asymmetric")
        });
        check(&mut failures, w2_atomic(&a, &a) <= 1e-12, || format!("triple {i}: d(a,a) > 0"));
        check(&mut failures, dab <= dac + dcb + 1e-10 * (1.0 + dab), || {
            format!("triple {i}: triangle inequality violated")
        });
    }

    report(
        9,
        failures,
        "mass, positivity, monotonicity, dissipation, convexity, metric axioms".into(),
    );
}
