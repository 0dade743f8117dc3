//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints its PASS/FAIL line; exits non-zero if any criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qite_pricing::calibration::{
    fit_theta0, load_theta, payoff_state_asian, payoff_state_european, DeConfig, FitConfig, FitResult, TargetState,
};
use qite_pricing::cli::{cmd_price, Cli, Command};
use qite_pricing::hamiltonian::{
    asian_hamiltonian, european_hamiltonian, pauli_decompose, AsianHamiltonian, HamiltonianSource, SpaceGrid,
    TransformConstants,
};
use qite_pricing::oracle::{
    black_scholes_call, exact_imaginary_evolution_td, interpolate, max_relative_error, rescale_to_price_asian,
    rescale_to_price_european, Interpolation,
};
use qite_pricing::varqite::{
    assemble_a, assemble_c, evolve, hadamard_test_entry, EvolutionConfig, HadamardTarget, MeasurementMode,
};
use qite_pricing::AnsatzCircuit;

const SEED: u64 = 7;
const STRIKE: f64 = 100.0;

struct Setup {
    consts: TransformConstants,
    euro_grid: SpaceGrid,
    asian_grid: SpaceGrid,
    euro_target: TargetState,
    asian_target: TargetState,
    circuit: AnsatzCircuit,
}

impl Setup {
    fn new() -> Self {
        let consts = TransformConstants::new(0.2, 0.0, 1.0).unwrap();
        let euro_grid = SpaceGrid::log_price(50.0, 150.0, 4).unwrap();
        let asian_grid = SpaceGrid::new(-0.5, 0.4, 16).unwrap();
        Self {
            euro_target: payoff_state_european(&euro_grid, STRIKE, &consts).unwrap(),
            asian_target: payoff_state_asian(&asian_grid).unwrap(),
            circuit: AnsatzCircuit::build(4, 3).unwrap(),
            consts,
            euro_grid,
            asian_grid,
        }
    }

    fn random_theta(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        use std::f64::consts::PI;
        (0..self.circuit.n_params()).map(|_| rng.random_range(-PI..3.0 * PI)).collect()
    }
}

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: usize, name: &str, ok: bool, elapsed: Duration, limit: Duration, detail: String) {
        let ok = ok && elapsed <= limit;
        if !ok {
            self.failures += 1;
        }
        println!(
            "criterion {id} [{name}]: {} ({detail}; {:.2}s, limit {}s)",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
}

fn max_abs_complex(a: &DMatrix<num_complex::Complex64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn pauli_round_trip(s: &Setup, r: &mut Report) {
    let t = Instant::now();
    let euro = european_hamiltonian(&s.euro_grid, &s.consts).unwrap().matrix;
    let mut worst: f64 = 0.0;
    let mut cases = vec![euro];
    for tau in [0.0, s.consts.tau_max() / 2.0, s.consts.tau_max()] {
        cases.push(asian_hamiltonian(&s.asian_grid, tau, &s.consts).unwrap());
    }
    for h in &cases {
        let back = pauli_decompose(h).unwrap().reconstruct().unwrap();
        worst = worst.max(max_abs_complex(&back, h));
    }
    r.line(1, "pauli round trip", worst <= 1e-12, t.elapsed(), Duration::from_secs(1), format!("max error {worst:.2e}"));
}

fn derivative_correctness(s: &Setup, r: &mut Report) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let theta = s.random_theta(&mut rng);
        let exact = s.circuit.derivative_states(&theta).unwrap();
        for (k, d) in exact.iter().enumerate() {
            let fd = s.circuit.derivative_state_fd(&theta, k, 1e-5).unwrap().vector;
            for (a, b) in d.amplitudes().iter().zip(fd.amplitudes()) {
                worst = worst.max((a - b).norm());
            }
        }
    }
    r.line(2, "derivative states", worst <= 1e-6, t.elapsed(), Duration::from_secs(30), format!("max |Δ| {worst:.2e}"));
}

fn measurement_circuits(s: &Setup, r: &mut Report) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let c = &s.circuit;
    let n = c.n_params();
    let hams = [
        european_hamiltonian(&s.euro_grid, &s.consts).unwrap().matrix,
        asian_hamiltonian(&s.asian_grid, s.consts.tau_max() / 2.0, &s.consts).unwrap(),
    ];
    let paulis: Vec<_> = hams.iter().map(|h| pauli_decompose(h).unwrap()).collect();
    let mut worst_a: f64 = 0.0;
    let mut worst_c: f64 = 0.0;
    for _ in 0..3 {
        let theta = s.random_theta(&mut rng);
        let a = assemble_a(c, &theta).unwrap();
        for i in 0..n {
            for j in 0..n {
                let v = hadamard_test_entry(c, &theta, i, &HadamardTarget::Param(j), MeasurementMode::Exact, &mut rng)
                    .unwrap();
                worst_a = worst_a.max((v - a[(i, j)]).abs());
            }
        }
        for (h, p) in hams.iter().zip(&paulis) {
            let direct = assemble_c(c, &theta, h).unwrap();
            for i in 0..n {
                let mut v = 0.0;
                for term in &p.terms {
                    v += hadamard_test_entry(c, &theta, i, &HadamardTarget::Pauli(term.clone()), MeasurementMode::Exact, &mut rng)
                        .unwrap();
                }
                worst_c = worst_c.max((v - direct[i]).abs());
            }
        }
    }
    let theta = s.random_theta(&mut rng);
    let exact = assemble_a(c, &theta).unwrap()[(1, 7)];
    let mut shot_rng = ChaCha8Rng::seed_from_u64(SEED);
    let shots =
        hadamard_test_entry(c, &theta, 1, &HadamardTarget::Param(7), MeasurementMode::Shots(1_000_000), &mut shot_rng)
            .unwrap();
    let shot_err = (shots - exact).abs();
    r.line(
        3,
        "measurement circuits",
        worst_a <= 1e-10 && worst_c <= 1e-10 && shot_err <= 3e-3,
        t.elapsed(),
        Duration::from_secs(120),
        format!("A {worst_a:.2e}, C {worst_c:.2e}, A_2,8 with 1e6 shots off by {shot_err:.2e}"),
    );
}

fn calibrate(s: &Setup, target: &TargetState) -> (FitResult, Duration) {
    let t = Instant::now();
    let cfg = FitConfig { de: DeConfig { seed: SEED, ..DeConfig::default() }, ..FitConfig::default() };
    (fit_theta0(&s.circuit, target, &cfg).unwrap(), t.elapsed())
}

fn calibration(s: &Setup, r: &mut Report) -> (FitResult, FitResult) {
    let (euro, te) = calibrate(s, &s.euro_target);
    let (asian, ta) = calibrate(s, &s.asian_target);
    let ok = euro.residual <= 0.05 && asian.residual <= 0.05 && te.max(ta) <= Duration::from_secs(300);
    r.line(
        4,
        "payoff calibration",
        ok,
        te.max(ta),
        Duration::from_secs(300),
        format!("ε european {:.2e} ({:.1}s), ε asian {:.2e} ({:.1}s)", euro.residual, te.as_secs_f64(), asian.residual, ta.as_secs_f64()),
    );
    (euro, asian)
}

fn european_run(s: &Setup, fit: &FitResult, r: &mut Report) {
    let t = Instant::now();
    let h = european_hamiltonian(&s.euro_grid, &s.consts).unwrap();
    let cfg = EvolutionConfig::new(500, s.consts.tau_max());
    let reference = exact_imaginary_evolution_td(&h, &s.euro_target.vector, &cfg.tau_grid()).unwrap();
    let trace = evolve(&s.circuit, &fit.theta0, &h, &cfg, Some(&reference)).unwrap();
    let bound = 2.0 * (fit.residual + 0.05);
    let max_d = trace.max_oracle_distance().unwrap();
    let final_d = trace.records.last().unwrap().oracle_distance.unwrap();
    r.line(
        5,
        "european trajectory",
        max_d <= bound && final_d <= 0.1,
        t.elapsed(),
        Duration::from_secs(300),
        format!("max distance {max_d:.2e} (bound {bound:.3}), final {final_d:.2e}"),
    );

    let t = Instant::now();
    let phi = s.circuit.prepare_state(trace.final_theta().unwrap()).unwrap();
    let q = rescale_to_price_european(&phi, cfg.tau_final, &s.euro_grid, &s.consts, STRIKE).unwrap();
    let o = rescale_to_price_european(reference.last(), cfg.tau_final, &s.euro_grid, &s.consts, STRIKE).unwrap();
    let x0 = 100f64.ln();
    let qp = interpolate(s.euro_grid.values(), &q, x0, Interpolation::Linear).unwrap();
    let op = interpolate(s.euro_grid.values(), &o, x0, Interpolation::Linear).unwrap();
    let bs = black_scholes_call(100.0, STRIKE, 0.2, 0.0, 1.0).unwrap();
    let rel = ((qp - op) / op).abs();
    r.line(
        6,
        "european price",
        rel <= 0.05,
        t.elapsed(),
        Duration::from_secs(60),
        format!("quantum {qp:.4}, oracle {op:.4}, rel {rel:.2e}; closed form {bs:.4}, grid gap {:.4}", op - bs),
    );
}

fn asian_run(s: &Setup, fit: &FitResult, r: &mut Report) {
    let t = Instant::now();
    let h = AsianHamiltonian { grid: s.asian_grid.clone(), consts: s.consts };
    let cfg = EvolutionConfig::new(500, s.consts.tau_max());
    let taus = cfg.tau_grid();
    let reference = exact_imaginary_evolution_td(&h, &s.asian_target.vector, &taus).unwrap();
    let trace = evolve(&s.circuit, &fit.theta0, &h, &cfg, Some(&reference)).unwrap();
    let h_first = h.matrix_at(taus[0]).unwrap();
    let h_last = h.matrix_at(taus[taus.len() - 2]).unwrap();
    let updated = h.is_time_dependent() && (h_first - h_last).amax() > 0.0 && trace.records.len() == taus.len();

    let phi = s.circuit.prepare_state(trace.final_theta().unwrap()).unwrap();
    let q = rescale_to_price_asian(&phi, &s.asian_grid, 100.0, STRIKE, &s.consts, Interpolation::Linear).unwrap();
    let o = rescale_to_price_asian(reference.last(), &s.asian_grid, 100.0, STRIKE, &s.consts, Interpolation::Linear)
        .unwrap();
    let last = s.asian_grid.len() - 1;
    let rel = max_relative_error(&q.q_values[1..last], &o.q_values[1..last], 0.01);
    r.line(
        7,
        "asian pipeline",
        updated && rel <= 0.05,
        t.elapsed(),
        Duration::from_secs(600),
        format!(
            "interior Q rel error {rel:.2e}; price quantum {:.4}, oracle {:.4} at Y0={}; max distance {:.2e}",
            q.price,
            o.price,
            q.y0,
            trace.max_oracle_distance().unwrap()
        ),
    );
}

fn table_replay(s: &Setup, r: &mut Report) {
    let t = Instant::now();
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let read = |name: &str| load_theta(&std::fs::read_to_string(data.join(name)).unwrap()).unwrap();
    let cfg = EvolutionConfig::new(500, s.consts.tau_max());
    let euro_h = european_hamiltonian(&s.euro_grid, &s.consts).unwrap();
    let asian_h = AsianHamiltonian { grid: s.asian_grid.clone(), consts: s.consts };
    let euro_end = exact_imaginary_evolution_td(&euro_h, &s.euro_target.vector, &cfg.tau_grid()).unwrap();
    let asian_end = exact_imaginary_evolution_td(&asian_h, &s.asian_target.vector, &cfg.tau_grid()).unwrap();
    let mut res = Vec::new();
    for (file, target) in [
        ("european_tau0.csv", &s.euro_target.vector),
        ("european_tau_final.csv", euro_end.last()),
        ("asian_tau0.csv", &s.asian_target.vector),
        ("asian_tau_final.csv", asian_end.last()),
    ] {
        let theta = read(file);
        let d = s.circuit.prepare_state(&theta).unwrap().distance(target).unwrap();
        res.push(format!("{} {d:.3}", file.trim_end_matches(".csv")));
    }
    r.line(8, "table replay (diagnostic)", res.len() == 4, t.elapsed(), Duration::from_secs(1), res.join(", "));
}

fn price_once(dir: &Path, contract: &str, extra: &[&str]) {
    let mut args = vec!["qite", "price", "--contract", contract, "--out-dir", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    let cli = <Cli as clap::Parser>::try_parse_from(args).unwrap();
    let Command::Price(a) = cli.command else { unreachable!() };
    assert_eq!(cmd_price(&a).unwrap(), 0);
}

fn determinism(r: &mut Report) {
    let t = Instant::now();
    let runs: [(&str, &[&str]); 3] = [
        ("european", &[]),
        ("asian", &[]),
        ("european", &["--mode", "shots", "--shots", "100000", "--steps", "20", "--generations", "200"]),
    ];
    let mut identical = true;
    let mut files = 0;
    for (contract, extra) in runs {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        price_once(a.path(), contract, extra);
        price_once(b.path(), contract, extra);
        for entry in std::fs::read_dir(a.path()).unwrap() {
            let path = entry.unwrap().path();
            let other = b.path().join(path.file_name().unwrap());
            identical &= std::fs::read(&path).unwrap() == std::fs::read(other).unwrap();
            files += 1;
        }
    }
    r.line(
        9,
        "determinism",
        identical && files == 12,
        t.elapsed(),
        Duration::from_secs(300),
        format!("{files} CSV files compared, identical: {identical}"),
    );
}

fn main() {
    let s = Setup::new();
    let mut r = Report { failures: 0 };
    pauli_round_trip(&s, &mut r);
    derivative_correctness(&s, &mut r);
    measurement_circuits(&s, &mut r);
    let (euro, asian) = calibration(&s, &mut r);
    european_run(&s, &euro, &mut r);
    asian_run(&s, &asian, &mut r);
    table_replay(&s, &mut r);
    determinism(&mut r);
    println!("acceptance: {} of 9 criteria passed", 9 - r.failures);
    if r.failures > 0 {
        std::process::exit(1);
    }
}
