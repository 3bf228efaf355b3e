//! Near-constant-velocity motion and position-measurement models.
//!
//! State is one-dimensional position plus velocity, propagated with the
//! standard continuous-white-noise-acceleration discretization and updated
//! with a scalar position measurement. All likelihoods are returned in the
//! log domain; products of many per-track factors underflow otherwise.

use thiserror::Error;

/// Numerical failure inside a Kalman operation.
#[derive(Debug, Error, PartialEq)]
pub enum KinematicsError {
    /// Innovation covariance was not strictly positive.
    #[error("innovation covariance {0} is not positive")]
    DegenerateInnovation(f64),
}

/// Gaussian over (position, velocity).
///
/// `cov` is row-major symmetric positive semi-definite:
/// `[[var_pos, cov_pv], [cov_pv, var_vel]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl GaussianState {
    pub fn new(mean: [f64; 2], cov: [[f64; 2]; 2]) -> Self {
        let state = Self { mean, cov };
        debug_assert!(state.is_valid(), "invalid Gaussian state: {state:?}");
        state
    }

    /// Position component of the mean.
    pub fn position(&self) -> f64 {
        self.mean[0]
    }

    /// Position standard deviation.
    pub fn position_std(&self) -> f64 {
        self.cov[0][0].max(0.0).sqrt()
    }

    /// Symmetry within 1e-9 relative tolerance and eigenvalues >= -1e-12.
    pub fn is_valid(&self) -> bool {
        let c = &self.cov;
        let scale = c[0][0].abs().max(c[1][1].abs()).max(c[0][1].abs()).max(1.0);
        if (c[0][1] - c[1][0]).abs() > 1e-9 * scale {
            return false;
        }
        if !c.iter().flatten().all(|x| x.is_finite()) {
            return false;
        }
        // Smallest eigenvalue of a symmetric 2x2.
        let tr = c[0][0] + c[1][1];
        let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        let eig_min = 0.5 * (tr - disc);
        eig_min >= -1e-12
    }
}

/// Near-constant-velocity model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NcvModel {
    /// Continuous process-noise intensity (m^2/s^3).
    pub q: f64,
    /// Frame period (s).
    pub dt: f64,
    /// Measurement standard deviation (m).
    pub meas_sigma: f64,
}

impl NcvModel {
    pub fn new(q: f64, dt: f64, meas_sigma: f64) -> Self {
        assert!(q > 0.0 && dt > 0.0 && meas_sigma > 0.0, "NCV parameters must be positive");
        Self { q, dt, meas_sigma }
    }
}

impl Default for NcvModel {
    fn default() -> Self {
        Self { q: 1.0, dt: 1.0, meas_sigma: 1.0 }
    }
}

/// Propagate a state one frame ahead: `mean' = F mean`, `P' = F P F' + Q`
/// with `F = [[1, dt], [0, 1]]` and `Q = q [[dt^3/3, dt^2/2], [dt^2/2, dt]]`.
pub fn predict(state: &GaussianState, model: &NcvModel) -> GaussianState {
    let dt = model.dt;
    let [p, v] = state.mean;
    let c = &state.cov;

    // F P F' expanded by hand for the 2x2 case.
    let fp00 = c[0][0] + dt * c[1][0];
    let fp01 = c[0][1] + dt * c[1][1];
    let s00 = fp00 + fp01 * dt;
    let s01 = fp01;
    let s11 = c[1][1];

    let q = model.q;
    let q00 = q * dt * dt * dt / 3.0;
    let q01 = q * dt * dt / 2.0;
    let q11 = q * dt;

    GaussianState::new([p + dt * v, v], [[s00 + q00, s01 + q01], [s01 + q01, s11 + q11]])
}

/// Log-density of the predicted measurement: `log N(z; H mean, H P H' + R)`.
pub fn log_likelihood(
    state: &GaussianState,
    z: f64,
    model: &NcvModel,
) -> Result<f64, KinematicsError> {
    let s = innovation_covariance(state, model)?;
    let residual = z - state.mean[0];
    Ok(-0.5 * ((2.0 * std::f64::consts::PI * s).ln() + residual * residual / s))
}

/// Kalman update with `H = [1, 0]`, `R = meas_sigma^2`.
///
/// Returns the posterior state and the measurement log-likelihood. Uses the
/// Joseph-stabilized covariance form so repeated application preserves
/// symmetry and positive semi-definiteness.
pub fn update(
    state: &GaussianState,
    z: f64,
    model: &NcvModel,
) -> Result<(GaussianState, f64), KinematicsError> {
    let s = innovation_covariance(state, model)?;
    let log_lik = log_likelihood(state, z, model)?;

    let c = &state.cov;
    let k0 = c[0][0] / s;
    let k1 = c[1][0] / s;
    let residual = z - state.mean[0];
    let mean = [state.mean[0] + k0 * residual, state.mean[1] + k1 * residual];

    // Joseph form: (I - K H) P (I - K H)' + K R K'.
    let a = 1.0 - k0; // (I - K H) = [[1 - k0, 0], [-k1, 1]]
    let r = model.meas_sigma * model.meas_sigma;
    let p00 = a * a * c[0][0] + k0 * k0 * r;
    let p01 = a * (c[0][1] - k1 * c[0][0]) + k0 * k1 * r;
    let p10 = a * (c[1][0] - k1 * c[0][0]) + k0 * k1 * r;
    let p11 = c[1][1] - k1 * c[0][1] - k1 * (c[1][0] - k1 * c[0][0]) + k1 * k1 * r;
    let p01s = 0.5 * (p01 + p10);

    Ok((GaussianState::new(mean, [[p00, p01s], [p01s, p11]]), log_lik))
}

/// Coarse gate: `|z - predicted position| <= gate_distance`, boundary inclusive.
pub fn gate(state: &GaussianState, z: f64, gate_distance: f64) -> bool {
    debug_assert!(gate_distance > 0.0);
    (z - state.mean[0]).abs() <= gate_distance
}

fn innovation_covariance(state: &GaussianState, model: &NcvModel) -> Result<f64, KinematicsError> {
    let s = state.cov[0][0] + model.meas_sigma * model.meas_sigma;
    if s <= 0.0 {
        return Err(KinematicsError::DegenerateInnovation(s));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn default_model() -> NcvModel {
        NcvModel::new(1.0, 1.0, 1.0)
    }

    #[test]
    fn predict_zero_state_propagates_process_noise_only() {
        let s = GaussianState::new([0.0, 0.0], [[0.0, 0.0], [0.0, 0.0]]);
        let out = predict(&s, &default_model());
        assert_eq!(out.mean, [0.0, 0.0]);
        assert_abs_diff_eq!(out.cov[0][0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.cov[0][1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(out.cov[1][0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(out.cov[1][1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn predict_moves_mean_along_velocity() {
        let s = GaussianState::new([10.0, 2.0], [[1.0, 0.0], [0.0, 1.0]]);
        let out = predict(&s, &default_model());
        assert_eq!(out.mean, [12.0, 2.0]);
    }

    #[test]
    fn predict_matches_independent_matrix_arithmetic() {
        // F P F' + Q evaluated by a separate script for q=1, dt=0.5.
        let s = GaussianState::new([5.0, -1.0], [[4.0, 0.0], [0.0, 1.0]]);
        let out = predict(&s, &NcvModel::new(1.0, 0.5, 1.0));
        assert_abs_diff_eq!(out.mean[0], 4.5, epsilon = 1e-15);
        assert_abs_diff_eq!(out.mean[1], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.cov[0][0], 4.291666666666667, epsilon = 1e-12);
        assert_abs_diff_eq!(out.cov[0][1], 0.625, epsilon = 1e-12);
        assert_abs_diff_eq!(out.cov[1][0], 0.625, epsilon = 1e-12);
        assert_abs_diff_eq!(out.cov[1][1], 1.5, epsilon = 1e-12);
    }

    #[test]
    fn update_log_likelihood_matches_closed_form() {
        let s = GaussianState::new([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]);
        let (_, log_lik) = update(&s, 0.0, &default_model()).unwrap();
        assert_abs_diff_eq!(log_lik, -1.2655121234846454, epsilon = 1e-12);
    }

    #[test]
    fn update_high_gain_limit_pulls_mean_to_measurement() {
        let s = GaussianState::new([0.0, 0.0], [[1e12, 0.0], [0.0, 1.0]]);
        let (post, _) = update(&s, 42.0, &default_model()).unwrap();
        assert_abs_diff_eq!(post.mean[0], 42.0, epsilon = 1e-6);
    }

    #[test]
    fn update_scalar_gain_by_hand() {
        let s = GaussianState::new([10.0, 0.0], [[4.0, 0.0], [0.0, 1.0]]);
        let (post, log_lik) = update(&s, 12.0, &default_model()).unwrap();
        assert_abs_diff_eq!(post.mean[0], 11.6, epsilon = 1e-12);
        // S = 5, residual = 2: closed-form Gaussian log pdf.
        assert_abs_diff_eq!(log_lik, -2.123657489421723, epsilon = 1e-12);
    }

    #[test]
    fn gate_boundary_is_inclusive() {
        let s = GaussianState::new([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]);
        assert!(gate(&s, 19.9, 20.0));
        assert!(!gate(&s, 20.1, 20.0));
        assert!(gate(&s, 20.0, 20.0));
        assert!(gate(&s, -20.0, 20.0));
    }

    #[test]
    fn update_at_predicted_position_keeps_mean_and_shrinks_variance() {
        let model = default_model();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let s = random_state(&mut rng);
            let pred = predict(&s, &model);
            let (post, _) = update(&pred, pred.mean[0], &model).unwrap();
            assert_abs_diff_eq!(post.mean[0], pred.mean[0], epsilon = 1e-9);
            assert!(post.cov[0][0] < pred.cov[0][0]);
        }
    }

    #[test]
    fn log_likelihood_matches_scalar_gaussian_pdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..500 {
            let s = random_state(&mut rng);
            let sigma: f64 = rng.gen_range(0.1..4.0);
            let model = NcvModel::new(1.0, 1.0, sigma);
            let z: f64 = rng.gen_range(-30.0..30.0);
            let got = log_likelihood(&s, z, &model).unwrap();
            let var = s.cov[0][0] + sigma * sigma;
            let expect = (1.0 / (2.0 * std::f64::consts::PI * var).sqrt()).ln()
                - (z - s.mean[0]).powi(2) / (2.0 * var);
            assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn covariance_stays_symmetric_psd_over_many_applications() {
        // 1e6 alternating predict/update applications across restarts.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut applications: u64 = 0;
        while applications < 1_000_000 {
            let model = NcvModel::new(
                rng.gen_range(0.1..3.0),
                rng.gen_range(0.1..2.0),
                rng.gen_range(0.2..3.0),
            );
            let mut s = random_state(&mut rng);
            for _ in 0..1000 {
                s = predict(&s, &model);
                assert!(s.is_valid(), "predict broke invariants: {s:?}");
                let z = s.mean[0] + rng.gen_range(-5.0..5.0);
                s = update(&s, z, &model).unwrap().0;
                assert!(s.is_valid(), "update broke invariants: {s:?}");
                applications += 2;
            }
        }
    }

    fn random_state(rng: &mut ChaCha8Rng) -> GaussianState {
        // Random PSD covariance via A A' + small jitter.
        let a: [[f64; 2]; 2] = [
            [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
            [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
        ];
        let cov = [
            [a[0][0] * a[0][0] + a[0][1] * a[0][1] + 0.01, a[0][0] * a[1][0] + a[0][1] * a[1][1]],
            [a[0][0] * a[1][0] + a[0][1] * a[1][1], a[1][0] * a[1][0] + a[1][1] * a[1][1] + 0.01],
        ];
        GaussianState::new([rng.gen_range(-20.0..20.0), rng.gen_range(-3.0..3.0)], cov)
    }
}
