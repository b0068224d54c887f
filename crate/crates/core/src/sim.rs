//! Fixed-step RK4 simulation of the plant, observer, and state feedback.
//!
//! The observer run integrates the plant and the Luenberger observer as
//! one coupled system; output injection only sees the measurements that
//! the sensor configuration keeps active. The controller run closes the
//! loop with `u = -Pi K x`, where `Pi` masks the inactive actuators.
//! Trajectories record a divergence flag instead of erroring when the
//! state blows up, so unstable open loops can still be inspected.

use nalgebra::{DMatrix, DVector};

use crate::error::CoreError;
use crate::model::{NdsModel, SensorConfig};

/// State magnitudes past this point count as divergence and stop the run.
const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub t_end: f64,
    pub dt: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { t_end: 10.0, dt: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// Observer estimates for observer runs, applied inputs for
    /// controller runs.
    pub companion: Vec<DVector<f64>>,
    /// `||x - xhat||` for observer runs, `||x||` for controller runs.
    pub norms: Vec<f64>,
    pub diverged: bool,
}

impl Trajectory {
    /// Plain CSV: time, state entries, companion entries, norm.
    pub fn to_csv(&self) -> String {
        let nx = self.states.first().map_or(0, |s| s.len());
        let nc = self.companion.first().map_or(0, |s| s.len());
        let mut out = String::from("t");
        for i in 0..nx {
            out.push_str(&format!(",x{i}"));
        }
        for i in 0..nc {
            out.push_str(&format!(",z{i}"));
        }
        out.push_str(",norm\n");
        for k in 0..self.times.len() {
            out.push_str(&format!("{}", self.times[k]));
            for v in self.states[k].iter().chain(self.companion[k].iter()) {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{}\n", self.norms[k]));
        }
        out
    }
}

fn rk4_step<F>(deriv: &F, t: f64, y: &DVector<f64>, dt: f64) -> DVector<f64>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let k1 = deriv(t, y);
    let k2 = deriv(t + 0.5 * dt, &(y + 0.5 * dt * &k1));
    let k3 = deriv(t + 0.5 * dt, &(y + 0.5 * dt * &k2));
    let k4 = deriv(t + dt, &(y + dt * &k3));
    y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

fn check_sim_args(opts: &SimOptions) -> Result<usize, CoreError> {
    if !(opts.dt > 0.0 && opts.t_end > 0.0) {
        return Err(CoreError::invalid("the step size and horizon must be positive"));
    }
    Ok((opts.t_end / opts.dt).round() as usize)
}

/// Integrates the plant together with the observer
/// `xhat' = A xhat + G f(xhat) + L Gamma C (x - xhat)`, with the plant
/// input held at zero.
pub fn simulate_observer<F>(
    m: &NdsModel,
    sensors: &SensorConfig,
    gain_l: &DMatrix<f64>,
    f: F,
    x0: &DVector<f64>,
    xhat0: &DVector<f64>,
    opts: &SimOptions,
) -> Result<Trajectory, CoreError>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let (nx, ny, ng) = (m.nx(), m.ny(), m.ng());
    if x0.len() != nx || xhat0.len() != nx {
        return Err(CoreError::dim("initial states must match the plant order"));
    }
    if gain_l.nrows() != nx || gain_l.ncols() != ny {
        return Err(CoreError::dim("the observer gain must be n_x by n_y"));
    }
    if sensors.expanded.len() != ny {
        return Err(CoreError::dim("one sensor flag per measurement"));
    }
    let steps = check_sim_args(opts)?;
    // Fold the measurement mask into the injection once.
    let mut masked_gain = gain_l.clone();
    for (j, &on) in sensors.expanded.iter().enumerate() {
        if !on {
            masked_gain.column_mut(j).fill(0.0);
        }
    }
    let lc = &masked_gain * &m.c;

    let deriv = |_t: f64, z: &DVector<f64>| {
        let x = z.rows(0, nx).into_owned();
        let xh = z.rows(nx, nx).into_owned();
        let mut dz = DVector::zeros(2 * nx);
        let mut dx = &m.a * &x;
        let mut dxh = &m.a * &xh + &lc * (&x - &xh);
        if ng > 0 {
            dx += &m.g * f(&x);
            dxh += &m.g * f(&xh);
        }
        dz.rows_mut(0, nx).copy_from(&dx);
        dz.rows_mut(nx, nx).copy_from(&dxh);
        dz
    };

    let mut z = DVector::zeros(2 * nx);
    z.rows_mut(0, nx).copy_from(x0);
    z.rows_mut(nx, nx).copy_from(xhat0);
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        companion: Vec::with_capacity(steps + 1),
        norms: Vec::with_capacity(steps + 1),
        diverged: false,
    };
    for k in 0..=steps {
        let t = k as f64 * opts.dt;
        let x = z.rows(0, nx).into_owned();
        let xh = z.rows(nx, nx).into_owned();
        traj.times.push(t);
        traj.norms.push((&x - &xh).norm());
        traj.states.push(x);
        traj.companion.push(xh);
        if z.amax() > DIVERGENCE_NORM || !z.iter().all(|v| v.is_finite()) {
            traj.diverged = true;
            break;
        }
        if k < steps {
            z = rk4_step(&deriv, t, &z, opts.dt);
        }
    }
    Ok(traj)
}

/// Integrates the closed loop `x' = A x + G f(x) - B Pi K x`, where `Pi`
/// zeroes the inputs whose actuators are inactive.
pub fn simulate_controller<F>(
    m: &NdsModel,
    actuators: &[bool],
    gain_k: &DMatrix<f64>,
    f: F,
    x0: &DVector<f64>,
    opts: &SimOptions,
) -> Result<Trajectory, CoreError>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let (nx, nu, ng) = (m.nx(), m.nu(), m.ng());
    if x0.len() != nx {
        return Err(CoreError::dim("the initial state must match the plant order"));
    }
    if gain_k.nrows() != nu || gain_k.ncols() != nx {
        return Err(CoreError::dim("the feedback gain must be n_u by n_x"));
    }
    if actuators.len() != nu {
        return Err(CoreError::dim("one actuator flag per input"));
    }
    let steps = check_sim_args(opts)?;
    let mut masked_k = gain_k.clone();
    for (i, &on) in actuators.iter().enumerate() {
        if !on {
            masked_k.row_mut(i).fill(0.0);
        }
    }

    let feedback = |x: &DVector<f64>| -(&masked_k * x);
    let deriv = |_t: f64, x: &DVector<f64>| {
        let mut dx = &m.a * x + &m.b * feedback(x);
        if ng > 0 {
            dx += &m.g * f(x);
        }
        dx
    };

    let mut x = x0.clone();
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        companion: Vec::with_capacity(steps + 1),
        norms: Vec::with_capacity(steps + 1),
        diverged: false,
    };
    for k in 0..=steps {
        let t = k as f64 * opts.dt;
        traj.times.push(t);
        traj.norms.push(x.norm());
        traj.companion.push(feedback(&x));
        traj.states.push(x.clone());
        if x.amax() > DIVERGENCE_NORM || !x.iter().all(|v| v.is_finite()) {
            traj.diverged = true;
            break;
        }
        if k < steps {
            x = rk4_step(&deriv, t, &x, opts.dt);
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Nonlinearity;
    use nalgebra::{dmatrix, dvector};

    fn zero_f(_x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(0)
    }

    fn scalar_model(a: f64) -> NdsModel {
        NdsModel {
            a: dmatrix![a],
            b: dmatrix![1.0],
            c: dmatrix![1.0],
            g: DMatrix::zeros(1, 0),
            node_outputs: vec![1],
            node_inputs: vec![1],
            nonlinearity: Nonlinearity::Lipschitz { gamma_l: 0.0 },
            disturbance: None,
        }
    }

    #[test]
    fn exact_initial_estimate_keeps_zero_error() {
        let m = scalar_model(0.5);
        let sensors = SensorConfig::all_on(&m.node_outputs);
        let opts = SimOptions { t_end: 1.0, dt: 1e-3 };
        let traj = simulate_observer(
            &m,
            &sensors,
            &dmatrix![3.0],
            zero_f,
            &dvector![2.0],
            &dvector![2.0],
            &opts,
        )
        .unwrap();
        assert!(!traj.diverged);
        assert!(traj.norms.iter().all(|&e| e <= 1e-9));
    }

    #[test]
    fn error_decay_rate_matches_the_eigenvalue() {
        // Error dynamics e' = (a - l) e with a - l = -2.
        let m = scalar_model(1.0);
        let sensors = SensorConfig::all_on(&m.node_outputs);
        let opts = SimOptions { t_end: 5.0, dt: 1e-3 };
        let traj = simulate_observer(
            &m,
            &sensors,
            &dmatrix![3.0],
            zero_f,
            &dvector![0.0],
            &dvector![1.0],
            &opts,
        )
        .unwrap();
        let e_end = *traj.norms.last().unwrap();
        let rate = (e_end / traj.norms[0]).ln() / opts.t_end;
        assert!((rate - (-2.0)).abs() < 0.1 * 2.0, "observed rate {rate}");
    }

    #[test]
    fn inactive_sensors_inject_nothing() {
        let m = scalar_model(1.0);
        let off = SensorConfig::all_off(&m.node_outputs);
        let opts = SimOptions { t_end: 2.0, dt: 1e-2 };
        let with_gain = simulate_observer(
            &m,
            &off,
            &dmatrix![50.0],
            zero_f,
            &dvector![1.0],
            &dvector![0.0],
            &opts,
        )
        .unwrap();
        let no_gain = simulate_observer(
            &m,
            &off,
            &dmatrix![0.0],
            zero_f,
            &dvector![1.0],
            &dvector![0.0],
            &opts,
        )
        .unwrap();
        for (a, b) in with_gain.companion.iter().zip(&no_gain.companion) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn unstable_open_loop_raises_the_divergence_flag() {
        let m = scalar_model(1.0);
        let opts = SimOptions { t_end: 40.0, dt: 1e-2 };
        let traj = simulate_controller(
            &m,
            &[false],
            &dmatrix![10.0],
            zero_f,
            &dvector![1.0],
            &opts,
        )
        .unwrap();
        assert!(traj.diverged);
        assert!(traj.times.len() < 4001, "the run stops once it diverges");
    }

    #[test]
    fn feedback_stabilizes_the_unstable_scalar() {
        let m = scalar_model(1.0);
        let opts = SimOptions { t_end: 10.0, dt: 1e-3 };
        let traj = simulate_controller(
            &m,
            &[true],
            &dmatrix![2.0],
            zero_f,
            &dvector![1.0],
            &opts,
        )
        .unwrap();
        assert!(!traj.diverged);
        // Closed loop x' = -x, so x(10) = e^{-10}.
        let x_end = *traj.norms.last().unwrap();
        assert!((x_end - (-10.0f64).exp()).abs() < 1e-7, "x(10) = {x_end}");
        assert!((traj.companion.last().unwrap()[0] + 2.0 * x_end).abs() < 1e-12);
    }

    #[test]
    fn step_halving_shows_fourth_order_convergence() {
        // Nonlinear scalar plant x' = -x + sin(x); the dt/8 run serves
        // as the reference solution.
        let m = NdsModel { g: dmatrix![1.0], ..scalar_model(-1.0) };
        let f = |x: &DVector<f64>| dvector![x[0].sin()];
        let run = |dt: f64| {
            let opts = SimOptions { t_end: 2.0, dt };
            simulate_controller(&m, &[false], &dmatrix![0.0], f, &dvector![1.0], &opts)
                .unwrap()
                .norms
                .last()
                .cloned()
                .unwrap()
        };
        let reference = run(0.1 / 8.0);
        let coarse = (run(0.1) - reference).abs();
        let fine = (run(0.05) - reference).abs();
        let ratio = coarse / fine;
        assert!((12.0..=20.0).contains(&ratio), "error ratio {ratio}");
    }

    #[test]
    fn csv_export_has_one_row_per_sample() {
        let m = scalar_model(-1.0);
        let opts = SimOptions { t_end: 0.1, dt: 0.01 };
        let traj = simulate_controller(
            &m,
            &[true],
            &dmatrix![0.0],
            zero_f,
            &dvector![1.0],
            &opts,
        )
        .unwrap();
        let csv = traj.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,x0,z0,norm");
        assert_eq!(lines.count(), 11);
    }

    #[test]
    fn bad_dimensions_are_rejected() {
        let m = scalar_model(-1.0);
        let sensors = SensorConfig::all_on(&m.node_outputs);
        let opts = SimOptions::default();
        assert!(simulate_observer(
            &m,
            &sensors,
            &DMatrix::zeros(2, 1),
            zero_f,
            &dvector![0.0],
            &dvector![0.0],
            &opts
        )
        .is_err());
        assert!(
            simulate_controller(&m, &[true, false], &dmatrix![0.0], zero_f, &dvector![0.0], &opts)
                .is_err()
        );
    }
}
