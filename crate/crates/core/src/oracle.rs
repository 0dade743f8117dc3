//! Classical ground truth: exact normalized imaginary-time evolution, the
//! Black-Scholes closed form, and the boundary-anchored map from normalized
//! states back to prices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{usage, Error, Result};
use crate::hamiltonian::{q_of_t, HamiltonianSource, SpaceGrid, TransformConstants};
use crate::statevector::StateVector;

/// Largest τ‖H‖₁ propagated in a single exponential before renormalizing.
const MAX_EXPONENT: f64 = 32.0;

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.amax().max(1.0);
    (0..m.nrows()).all(|r| (0..r).all(|c| (m[(r, c)] - m[(c, r)]).abs() <= 1e-14 * scale))
}

/// e^M. Symmetric input goes through an eigendecomposition, anything else
/// through scaling and squaring of a truncated Taylor series.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    if is_symmetric(m) {
        expm_symmetric(m)
    } else {
        expm_taylor(m)
    }
}

pub fn expm_symmetric(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::exp));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

fn expm_taylor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm = one_norm(m);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let a = m / 2f64.powi(squarings);
    // ‖a‖ ≤ ½, so 20 terms leave a remainder below 1e-25
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=20 {
        term = &term * &a / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

fn real_state(values: &DVector<f64>) -> Result<StateVector> {
    StateVector::from_real(values.as_slice())
}

fn real_vector(state: &StateVector) -> Result<DVector<f64>> {
    if state.max_imag() > 1e-12 {
        return Err(usage("classical evolution expects a real state"));
    }
    Ok(DVector::from_vec(state.real_parts()))
}

/// Normalized e^{Hτ}ψ₀, propagated in renormalized slices when τ‖H‖ is large.
pub fn exact_imaginary_evolution(h: &DMatrix<f64>, psi0: &StateVector, tau: f64) -> Result<StateVector> {
    Ok(evolve_log_scaled(h, psi0, tau)?.0)
}

/// Normalized e^{Hτ}ψ₀ together with ln‖e^{Hτ}ψ₀‖.
fn evolve_log_scaled(h: &DMatrix<f64>, psi0: &StateVector, tau: f64) -> Result<(StateVector, f64)> {
    if h.nrows() != psi0.dim() || !h.is_square() {
        return Err(usage(format!("Hamiltonian is {}×{}, state dimension {}", h.nrows(), h.ncols(), psi0.dim())));
    }
    if tau < 0.0 {
        return Err(usage(format!("τ must be non-negative, got {tau}")));
    }
    let mut v = real_vector(psi0)?;
    let mut log_norm = v.norm().ln();
    v /= v.norm();
    let slices = ((tau * one_norm(h)) / MAX_EXPONENT).ceil().max(1.0) as usize;
    let prop = expm(&(h * (tau / slices as f64)));
    for _ in 0..slices {
        v = &prop * v;
        let n = v.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(usage("imaginary-time evolution annihilated or overflowed the state"));
        }
        log_norm += n.ln();
        v /= n;
    }
    Ok((real_state(&v)?, log_norm))
}

/// γ(τ) = ⟨ψ₀|e^{2Hτ}|ψ₀⟩^{−1/2}.
///
/// Equals 1/‖e^{Hτ}ψ₀‖ only for symmetric H; the evolution functions always
/// normalize by the actual norm.
pub fn normalization_gamma(h: &DMatrix<f64>, psi0: &StateVector, tau: f64) -> Result<f64> {
    let v = real_vector(psi0)?;
    let e = expm(&(h * (2.0 * tau)));
    let quad = v.dot(&(e * &v));
    if !(quad > 0.0) {
        return Err(usage(format!("⟨ψ₀|e^(2Hτ)|ψ₀⟩ = {quad} is not positive")));
    }
    Ok(quad.powf(-0.5))
}

/// Samples of the normalized reference evolution.
#[derive(Debug, Clone)]
pub struct ReferenceTrajectory {
    pub taus: Vec<f64>,
    /// Unit-norm states ψ(τ_k).
    pub states: Vec<StateVector>,
    /// ln‖u(τ_k)‖ of the unnormalized classical solution u = e^{log_norm}·ψ.
    pub log_norms: Vec<f64>,
}

impl ReferenceTrajectory {
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// Unnormalized classical solution at sample `k`.
    pub fn unnormalized(&self, k: usize) -> Vec<f64> {
        let s = self.log_norms[k].exp();
        self.states[k].real_parts().into_iter().map(|v| v * s).collect()
    }

    pub fn last(&self) -> &StateVector {
        self.states.last().expect("trajectory has at least one sample")
    }

    /// CSV with the same leading columns as an evolution trace, amplitudes in place of θ.
    pub fn to_csv(&self) -> String {
        let dim = self.states.first().map_or(0, StateVector::dim);
        let mut out = String::from("step,tau");
        for i in 1..=dim {
            out.push_str(&format!(",psi_{i}"));
        }
        out.push_str(",residual,oracle_distance\n");
        for (k, (tau, s)) in self.taus.iter().zip(&self.states).enumerate() {
            out.push_str(&format!("{k},{tau}"));
            for v in s.real_parts() {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(",0,0\n");
        }
        out
    }
}

/// Frozen-Hamiltonian product ψ_{k+1} ∝ e^{H(τ_k)Δτ_k} ψ_k on an increasing τ grid.
pub fn exact_imaginary_evolution_td(
    source: &dyn HamiltonianSource,
    psi0: &StateVector,
    taus: &[f64],
) -> Result<ReferenceTrajectory> {
    if taus.is_empty() || taus[0] != 0.0 {
        return Err(usage("τ grid must start at 0"));
    }
    if taus.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(usage("τ grid must be strictly increasing"));
    }
    let norm0 = psi0.norm();
    let mut states = vec![psi0.normalized()?];
    let mut log_norms = vec![norm0.ln()];
    let mut cached: Option<(DMatrix<f64>, f64, DMatrix<f64>)> = None;
    for w in taus.windows(2) {
        let dt = w[1] - w[0];
        let h = source.matrix_at(w[0])?;
        // constant Hamiltonians and uniform steps reuse one propagator
        let reuse = matches!(&cached, Some((hc, dc, _)) if *hc == h && *dc == dt);
        if !reuse {
            let prop = if dt * one_norm(&h) <= MAX_EXPONENT { Some(expm(&(&h * dt))) } else { None };
            cached = prop.map(|p| (h.clone(), dt, p));
        }
        let prev = states.last().unwrap();
        let (next, ln) = match &cached {
            Some((hc, dc, prop)) if *hc == h && *dc == dt => {
                let v = prop * real_vector(prev)?;
                let n = v.norm();
                (real_state(&(v / n))?, n.ln())
            }
            _ => evolve_log_scaled(&h, prev, dt)?,
        };
        log_norms.push(log_norms.last().unwrap() + ln);
        states.push(next);
    }
    Ok(ReferenceTrajectory { taus: taus.to_vec(), states, log_norms })
}

/// Unnormalized explicit Euler path u_{k+1} = (I + Δτ H(τ_k)) u_k, normalized per sample.
pub fn euler_fd_path(source: &dyn HamiltonianSource, psi0: &StateVector, taus: &[f64]) -> Result<Vec<StateVector>> {
    let mut u = real_vector(psi0)?;
    let mut out = vec![psi0.normalized()?];
    for w in taus.windows(2) {
        let h = source.matrix_at(w[0])?;
        u = &u + (h * &u) * (w[1] - w[0]);
        out.push(real_state(&u)?.normalized()?);
    }
    Ok(out)
}

/// Black-Scholes European call S·N(d₁) − K e^{−rT} N(d₂).
pub fn black_scholes_call(spot: f64, strike: f64, sigma: f64, rate: f64, maturity: f64) -> Result<f64> {
    if !(spot > 0.0 && strike > 0.0 && sigma > 0.0 && maturity > 0.0) {
        return Err(usage(format!("need S, K, σ, T > 0 (S={spot}, K={strike}, σ={sigma}, T={maturity})")));
    }
    let n = Normal::standard();
    let vol = sigma * maturity.sqrt();
    let d1 = ((spot / strike).ln() + (rate + 0.5 * sigma * sigma) * maturity) / vol;
    let d2 = d1 - vol;
    Ok(spot * n.cdf(d1) - strike * (-rate * maturity).exp() * n.cdf(d2))
}

/// European prices on the S-grid from a normalized state at scaled time τ.
///
/// The scale is fixed by the deep in-the-money boundary
/// V(t, S_max) = S_max − K e^{−r(T−t)}.
pub fn rescale_to_price_european(
    phi: &StateVector,
    tau: f64,
    grid: &SpaceGrid,
    consts: &TransformConstants,
    strike: f64,
) -> Result<Vec<f64>> {
    if phi.dim() != grid.len() {
        return Err(usage("state and grid sizes differ"));
    }
    let a = consts.a();
    let x_max = grid.v_max();
    let t = consts.calendar_time(tau);
    let boundary = x_max.exp() - strike * (-consts.rate * (consts.maturity - t)).exp();
    let anchor_u = (-a * x_max).exp() * boundary;
    let last = phi.amplitudes()[phi.dim() - 1].re;
    if last.abs() < 1e-12 {
        return Err(Error::Anchor(format!("boundary amplitude {last} too small to anchor")));
    }
    let scale = anchor_u / last;
    Ok(grid
        .values()
        .iter()
        .zip(phi.amplitudes())
        .map(|(x, p)| (a * x).exp() * scale * p.re)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    #[default]
    Linear,
    /// Three-point Lagrange through the nearest nodes.
    Quadratic,
}

/// Interpolate `values` on `grid` at `at`.
pub fn interpolate(grid: &[f64], values: &[f64], at: f64, how: Interpolation) -> Result<f64> {
    let n = grid.len();
    if n < 2 || values.len() != n {
        return Err(usage("interpolation needs matching grid and values with ≥ 2 points"));
    }
    let tol = 1e-12 * (grid[n - 1] - grid[0]).abs();
    if at < grid[0] - tol || at > grid[n - 1] + tol {
        return Err(Error::Extrapolation(format!("{at} outside [{}, {}]", grid[0], grid[n - 1])));
    }
    let i = grid.partition_point(|g| *g <= at).clamp(1, n - 1) - 1;
    match how {
        Interpolation::Linear => {
            let w = (at - grid[i]) / (grid[i + 1] - grid[i]);
            Ok(values[i] * (1.0 - w) + values[i + 1] * w)
        }
        Interpolation::Quadratic if n >= 3 => {
            let s = if i + 2 < n && (i == 0 || at - grid[i] > grid[i + 1] - at) { i } else { i.saturating_sub(1).min(n - 3) };
            let (x0, x1, x2) = (grid[s], grid[s + 1], grid[s + 2]);
            let l0 = (at - x1) * (at - x2) / ((x0 - x1) * (x0 - x2));
            let l1 = (at - x0) * (at - x2) / ((x1 - x0) * (x1 - x2));
            let l2 = (at - x0) * (at - x1) / ((x2 - x0) * (x2 - x1));
            Ok(values[s] * l0 + values[s + 1] * l1 + values[s + 2] * l2)
        }
        Interpolation::Quadratic => interpolate(grid, values, at, Interpolation::Linear),
    }
}

/// Q-curve on the y-grid plus the inception price S₀·Q(Y₀).
#[derive(Debug, Clone, PartialEq)]
pub struct AsianPrice {
    pub q_values: Vec<f64>,
    pub y0: f64,
    pub price: f64,
}

/// Asian Q-values anchored at the frozen boundary Q(τ, y_max) = max(y_max, 0).
pub fn rescale_to_price_asian(
    phi: &StateVector,
    grid: &SpaceGrid,
    spot: f64,
    strike: f64,
    consts: &TransformConstants,
    how: Interpolation,
) -> Result<AsianPrice> {
    if phi.dim() != grid.len() {
        return Err(usage("state and grid sizes differ"));
    }
    let last = phi.amplitudes()[phi.dim() - 1].re;
    if last.abs() < 1e-12 {
        return Err(Error::Anchor(format!("boundary amplitude {last} too small to anchor")));
    }
    let scale = grid.v_max().max(0.0) / last;
    let q_values: Vec<f64> = phi.amplitudes().iter().map(|p| p.re * scale).collect();
    let q0 = q_of_t(0.0, consts.rate, consts.maturity)?;
    let y0 = (q0 * spot - strike * (-consts.rate * consts.maturity).exp()) / spot;
    let q_at = interpolate(grid.values(), &q_values, y0, how)?;
    Ok(AsianPrice { q_values, y0, price: spot * q_at })
}

/// Largest |a_i − b_i| / |b_i| over points where |b_i| ≥ `floor`.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(_, r)| r.abs() >= floor)
        .map(|(x, r)| ((x - r) / r).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{european_hamiltonian, AsianHamiltonian, HamiltonianSpec};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn erf_series_cdf(x: f64) -> f64 {
        // Simpson quadrature of the standard normal density on [0, |x|]
        let n = 20_000;
        let h = x.abs() / n as f64;
        let f = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = f(0.0) + f(x.abs());
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let half = s * h / 3.0;
        if x >= 0.0 { 0.5 + half } else { 0.5 - half }
    }

    fn bs_reference(s: f64, k: f64, sigma: f64, r: f64, t: f64) -> f64 {
        let vol = sigma * t.sqrt();
        let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * t) / vol;
        s * erf_series_cdf(d1) - k * (-r * t).exp() * erf_series_cdf(d1 - vol)
    }

    #[test]
    fn black_scholes_examples() {
        let p = black_scholes_call(100.0, 100.0, 0.2, 0.0, 1.0).unwrap();
        assert!((p - bs_reference(100.0, 100.0, 0.2, 0.0, 1.0)).abs() < 1e-9);
        assert!((p - 7.9656).abs() < 5e-5, "{p}");
        // ATM, r = 0: S(2N(σ√T/2) − 1)
        assert!((p - 100.0 * (2.0 * erf_series_cdf(0.1) - 1.0)).abs() < 1e-9);
        let short = black_scholes_call(110.0, 100.0, 0.2, 0.0, 1e-10).unwrap();
        assert!((short - 10.0).abs() < 1e-9);
        let with_rate = black_scholes_call(95.0, 100.0, 0.3, 0.03, 0.5).unwrap();
        assert!((with_rate - bs_reference(95.0, 100.0, 0.3, 0.03, 0.5)).abs() < 1e-9);
        assert!(black_scholes_call(-1.0, 100.0, 0.2, 0.0, 1.0).is_err());
    }

    #[test]
    fn expm_paths_agree() {
        let sym = DMatrix::from_fn(6, 6, |r, c| ((r + c) as f64 * 0.31).sin() * 3.0);
        let sym = (&sym + sym.transpose()) * 0.5;
        assert!((expm_symmetric(&sym) - expm_taylor(&sym)).amax() / expm_symmetric(&sym).amax() < 1e-12);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -2.0, 0.5]));
        let e = expm(&d);
        assert!((e[(0, 0)] - 1f64.exp()).abs() < 1e-14 && (e[(1, 1)] - (-2f64).exp()).abs() < 1e-15);
        // nilpotent: e^N = I + N
        let nil = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 0.0, 0.0]);
        let e = expm(&nil);
        assert!((e - DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 0.0, 1.0])).amax() < 1e-14);
    }

    #[test]
    fn exact_evolution_examples() {
        let psi = StateVector::from_real(&[0.6, 0.8]).unwrap();
        let h = DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.7, 2.0]);
        assert!(exact_imaginary_evolution(&h, &psi, 0.0).unwrap().distance(&psi).unwrap() < 1e-15);
        let id = DMatrix::identity(2, 2);
        assert!(exact_imaginary_evolution(&id, &psi, 3.0).unwrap().distance(&psi).unwrap() < 1e-14);
        // diag(1, 0), ψ₀ = (1,1)/√2, τ = ln 2 → (2, 1)/√5
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let psi = StateVector::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap();
        let out = exact_imaginary_evolution(&h, &psi, 2f64.ln()).unwrap();
        let expected = StateVector::from_real(&[2.0 / 5f64.sqrt(), 1.0 / 5f64.sqrt()]).unwrap();
        assert!(out.distance(&expected).unwrap() < 1e-14);
    }

    #[test]
    fn large_exponents_are_sliced() {
        let h = DMatrix::from_row_slice(2, 2, &[800.0, 0.0, 0.0, 0.0]);
        let psi = StateVector::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap();
        let out = exact_imaginary_evolution(&h, &psi, 2.0).unwrap();
        assert!((out.real_parts()[0] - 1.0).abs() < 1e-15);
        let (_, ln) = evolve_log_scaled(&h, &psi, 2.0).unwrap();
        assert!((ln - (1600.0 + FRAC_1_SQRT_2.ln())).abs() < 1e-9);
    }

    #[test]
    fn gamma_matches_reciprocal_norm_for_symmetric_h() {
        let h = DMatrix::from_fn(4, 4, |r, c| if r == c { -(r as f64) } else { 0.2 / (1.0 + (r + c) as f64) });
        let psi = StateVector::from_real(&[0.5, 0.5, 0.5, 0.5]).unwrap();
        for tau in [0.0, 0.1, 0.7, 2.0] {
            let u = expm(&(&h * tau)) * DVector::from_vec(psi.real_parts());
            let g = normalization_gamma(&h, &psi, tau).unwrap();
            assert!((g - 1.0 / u.norm()).abs() <= 1e-12 * g.max(1.0), "τ={tau}");
        }
    }

    fn euro() -> (SpaceGrid, TransformConstants, HamiltonianSpec, StateVector) {
        let grid = SpaceGrid::log_price(50.0, 150.0, 4).unwrap();
        let consts = TransformConstants::new(0.2, 0.0, 1.0).unwrap();
        let h = european_hamiltonian(&grid, &consts).unwrap();
        let raw: Vec<f64> = grid.values().iter().map(|x| (-0.5 * x).exp() * (x.exp() - 100.0).max(0.0)).collect();
        let psi = StateVector::from_real(&raw).unwrap().normalized().unwrap();
        (grid, consts, h, psi)
    }

    #[test]
    fn frozen_product_matches_exact_for_constant_h() {
        let (_, consts, h, psi) = euro();
        let taus: Vec<f64> = (0..=50).map(|k| consts.tau_max() * k as f64 / 50.0).collect();
        let traj = exact_imaginary_evolution_td(&h, &psi, &taus).unwrap();
        for (k, tau) in taus.iter().enumerate() {
            let exact = exact_imaginary_evolution(&h.matrix, &psi, *tau).unwrap();
            assert!(traj.states[k].distance(&exact).unwrap() < 1e-8);
            assert!((traj.states[k].norm() - 1.0).abs() < 1e-12);
            // u is proportional to ψ
            let u = traj.unnormalized(k);
            let un = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            let dir = StateVector::from_real(&u.iter().map(|v| v / un).collect::<Vec<_>>()).unwrap();
            assert!(dir.distance(&traj.states[k]).unwrap() < 1e-10);
        }
        let one = exact_imaginary_evolution_td(&h, &psi, &taus[..2]).unwrap();
        let direct = exact_imaginary_evolution(&h.matrix, &psi, taus[1]).unwrap();
        assert!(one.states[1].distance(&direct).unwrap() < 1e-14);
        assert!(exact_imaginary_evolution_td(&h, &psi, &[0.0, 0.0]).is_err());
        assert!(exact_imaginary_evolution_td(&h, &psi, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn euler_fd_path_converges_to_frozen_product() {
        let grid = SpaceGrid::new(-0.5, 0.4, 16).unwrap();
        let consts = TransformConstants::new(0.2, 0.0, 1.0).unwrap();
        let src = AsianHamiltonian { grid: grid.clone(), consts };
        let raw: Vec<f64> = grid.values().iter().map(|y| y.max(0.0)).collect();
        let psi = StateVector::from_real(&raw).unwrap().normalized().unwrap();
        let dist = |steps: usize| {
            let taus: Vec<f64> = (0..=steps).map(|k| consts.tau_max() * k as f64 / steps as f64).collect();
            let exact = exact_imaginary_evolution_td(&src, &psi, &taus).unwrap();
            let fd = euler_fd_path(&src, &psi, &taus).unwrap();
            fd.last().unwrap().distance(exact.last()).unwrap()
        };
        let (d1, d2) = (dist(500), dist(1000));
        let ratio = d1 / d2;
        assert!((1.6..2.5).contains(&ratio), "d500={d1} d1000={d2}");
    }

    #[test]
    fn european_rescale_inverts_encoding() {
        let (grid, consts, _, psi) = euro();
        let v = rescale_to_price_european(&psi, 0.0, &grid, &consts, 100.0).unwrap();
        for (x, p) in grid.values().iter().zip(&v) {
            assert!((p - (x.exp() - 100.0).max(0.0)).abs() < 1e-10);
        }
        assert!((v[15] - 50.0).abs() < 1e-10);
        let dead = StateVector::from_real(&[1.0; 16].iter().enumerate().map(|(i, v)| if i == 15 { 0.0 } else { *v }).collect::<Vec<_>>()).unwrap();
        assert!(matches!(rescale_to_price_european(&dead, 0.0, &grid, &consts, 100.0), Err(Error::Anchor(_))));
    }

    #[test]
    fn asian_rescale_examples() {
        let grid = SpaceGrid::new(-0.5, 0.4, 16).unwrap();
        let consts = TransformConstants::new(0.2, 0.0, 1.0).unwrap();
        let raw: Vec<f64> = grid.values().iter().map(|y| y.max(0.0)).collect();
        assert!((raw[15] - 0.4).abs() < 1e-15);
        let psi = StateVector::from_real(&raw).unwrap().normalized().unwrap();
        let p = rescale_to_price_asian(&psi, &grid, 100.0, 100.0, &consts, Interpolation::Linear).unwrap();
        assert_eq!(p.y0, 0.0);
        for (q, r) in p.q_values.iter().zip(&raw) {
            assert!((q - r).abs() < 1e-10);
        }
        assert!((p.q_values[15] - 0.4).abs() < 1e-15);
        // Y₀ outside the grid
        assert!(matches!(
            rescale_to_price_asian(&psi, &grid, 100.0, 300.0, &consts, Interpolation::Linear),
            Err(Error::Extrapolation(_))
        ));
    }

    #[test]
    fn interpolation_orders() {
        let g: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let lin: Vec<f64> = g.iter().map(|x| 2.0 * x + 1.0).collect();
        let quad: Vec<f64> = g.iter().map(|x| x * x).collect();
        assert!((interpolate(&g, &lin, 2.5, Interpolation::Linear).unwrap() - 6.0).abs() < 1e-15);
        assert!((interpolate(&g, &quad, 2.5, Interpolation::Quadratic).unwrap() - 6.25).abs() < 1e-14);
        assert!((interpolate(&g, &quad, 0.2, Interpolation::Quadratic).unwrap() - 0.04).abs() < 1e-14);
        assert!((interpolate(&g, &quad, 4.0, Interpolation::Quadratic).unwrap() - 16.0).abs() < 1e-14);
        assert!(interpolate(&g, &lin, 4.5, Interpolation::Linear).is_err());
    }
}
